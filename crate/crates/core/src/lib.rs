//! Certified two-sided enclosures for the nonzero eigenfrequencies of the
//! two-dimensional Maxwell cavity operator.
//!
//! The pipeline is:
//!
//! 1. [`mesh`] builds conforming triangulations of the benchmark domains
//!    (square, L-shape, slit square with a crack, four-quadrant square).
//! 2. [`fespace`] puts continuous Lagrange elements on the mesh for the
//!    unknown `(E1, E2, H)` and eliminates the tangential trace of `E`.
//! 3. [`assembly`] produces three sparse symmetric matrices `A`, `B`, `C`
//!    from which the shifted pencil `(A - tB, C - 2tA + t^2 B)` is formed for
//!    any shift `t`.
//! 4. [`eigsolve`] solves the pencil (dense, or by a sparse Lanczos solver
//!    whose eigenvalue counts are certified with Sylvester inertia).
//! 5. [`enclosure`] maps the pencil eigenvalues to one-sided bounds
//!    `t + 1/tau` and runs the refinement loop that pairs upper and lower
//!    bounds into enclosures.
//! 6. [`benchmarks`] embeds reference spectra and drives convergence and
//!    pollution studies; [`io`] holds all file formats.

pub mod assembly;
pub mod benchmarks;
pub mod eigsolve;
pub mod enclosure;
pub mod error;
pub mod fespace;
pub mod io;
pub mod mesh;
pub mod sparse;

pub use assembly::{assemble, build_pencil, FormMatrices, MaterialCoefficients, Pencil};
pub use enclosure::{bounds_at, run_procedure, BoundSet, Enclosure, EnclosureReport, Side};
pub use error::{Error, Result};
pub use fespace::{build_space, Coefficients, FeSpace};
pub use mesh::{generate, refine_toward, refine_uniform, validate, DomainKind, DomainSpec, Mesh};
