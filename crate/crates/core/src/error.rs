use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("base subdivision count must be at least 1")]
    ZeroSubdivision,
    #[error("refinement factor must lie in (0, 1], got {0}")]
    InvalidRefinementFactor(f64),
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("polynomial order must lie in [1, 5], got {0}")]
    UnsupportedOrder(usize),
    #[error("mesh failed validation: {0}")]
    InvalidMesh(String),
    #[error("coefficient vector has length {got}, space has {expected} degrees of freedom")]
    LengthMismatch { expected: usize, got: usize },
    #[error("reference field list is empty")]
    EmptyReference,
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("region tag {0} has no material coefficients")]
    MissingRegion(u32),
    #[error("coefficient {name} for region {tag} must be positive and finite, got {value}")]
    NonPositiveCoefficient {
        name: &'static str,
        tag: u32,
        value: f64,
    },
    #[error("no quadrature rule of exactness degree {0} (supported: 0..=12)")]
    UnsupportedQuadrature(usize),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("right-hand matrix is not positive definite (pivot {pivot} = {value:e})")]
    Indefinite { pivot: usize, value: f64 },
    #[error("dimension {dim} exceeds the dense solver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("iterative eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum EnclosureError {
    #[error("right-hand matrix indefinite at t = {t}; perturb the shift")]
    IndefiniteRhs { t: f64 },
    #[error("no eigenvalues of the requested sign at t = {t}")]
    EmptyBranch { t: f64 },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Enclosure(#[from] EnclosureError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("{0}")]
    Invalid(String),
}
