//! Conforming triangulations of the benchmark domains.
//!
//! Meshes are immutable values: every operation returns a new [`Mesh`].
//! Slits are represented as cracks, i.e. vertices on the slit are duplicated
//! so that the two faces are topologically distinct boundary pieces.

mod generate;
mod refine;
mod validate;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use generate::generate;
pub use refine::{refine_toward, refine_uniform};
pub use validate::{validate, validate_with, CheckResult, MeshReport, DEFAULT_MIN_ANGLE_DEG};

use crate::error::MeshError;

pub type Point = [f64; 2];

/// Boundary tags written to mesh files.
pub mod tag {
    pub const BOTTOM: u32 = 1;
    pub const RIGHT: u32 = 2;
    pub const TOP: u32 = 3;
    pub const LEFT: u32 = 4;
    /// The two edges bounding the removed quadrant of the L-shape.
    pub const REENTRANT: u32 = 5;
    /// Face of the slit seen from below.
    pub const SLIT_LOWER: u32 = 6;
    /// Face of the slit seen from above.
    pub const SLIT_UPPER: u32 = 7;
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// Oriented so that the owning triangle lies to the left of `v[0] -> v[1]`.
    pub v: [usize; 2],
    pub tangent: Point,
    pub tag: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    region_tags: Vec<u32>,
    crack_pairs: Vec<[usize; 2]>,
    h_max: f64,
}

impl Mesh {
    /// Builds a mesh from raw parts without validating it.
    ///
    /// Boundary edges are re-oriented against their owning triangle when one
    /// exists, tangents are recomputed from coordinates and `h_max` is the
    /// longest triangle edge.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], u32)>,
        region_tags: Vec<u32>,
        crack_pairs: Vec<[usize; 2]>,
    ) -> Self {
        let mut directed: HashMap<(usize, usize), ()> = HashMap::new();
        for t in &triangles {
            for k in 0..3 {
                directed.insert((t[k], t[(k + 1) % 3]), ());
            }
        }
        let boundary_edges = boundary
            .into_iter()
            .map(|(v, tag)| {
                let v = if !directed.contains_key(&(v[0], v[1]))
                    && directed.contains_key(&(v[1], v[0]))
                {
                    [v[1], v[0]]
                } else {
                    v
                };
                let tangent = match (vertices.get(v[0]), vertices.get(v[1])) {
                    (Some(a), Some(b)) => unit(sub(*b, *a)),
                    _ => [f64::NAN, f64::NAN],
                };
                BoundaryEdge { v, tangent, tag }
            })
            .collect();
        let h_max = triangles
            .iter()
            .filter(|t| t.iter().all(|&i| i < vertices.len()))
            .map(|t| diameter(&vertices, t))
            .fold(0.0, f64::max);
        Mesh {
            vertices,
            triangles,
            boundary_edges,
            region_tags,
            crack_pairs,
            h_max,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn region_tags(&self) -> &[u32] {
        &self.region_tags
    }

    pub fn crack_pairs(&self) -> &[[usize; 2]] {
        &self.crack_pairs
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Area of the triangulated region.
    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                min_angle(&p)
            })
            .fold(180.0, f64::min)
    }

    /// Undirected edges in order of first appearance, keyed `(min, max)`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let key = edge_key(t[k], t[(k + 1) % 3]);
                if seen.insert(key, ()).is_none() {
                    out.push([key.0, key.1]);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// `(0, pi)^2`.
    Square,
    /// `(0, pi)^2` minus the closed square `[0, pi/2]^2`.
    Lshape,
    /// `(0, pi)^2` minus the segment `[pi/2, pi] x {pi/2}`.
    Slit,
    /// `(0, pi)^2` with one region tag per quadrant.
    Square4,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Square => "square",
            DomainKind::Lshape => "lshape",
            DomainKind::Slit => "slit",
            DomainKind::Square4 => "square4",
        }
    }

    /// Natural grading point: the re-entrant corner, the slit tip, or the
    /// cross point of the four material quadrants.
    pub fn singular_point(self) -> Point {
        [PI / 2.0, PI / 2.0]
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "sqr" => Ok(DomainKind::Square),
            "lshape" | "l-shape" | "l" => Ok(DomainKind::Lshape),
            "slit" | "cut" => Ok(DomainKind::Slit),
            "square4" | "transmission" => Ok(DomainKind::Square4),
            _ => Err(crate::Error::UnknownDomain(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub point: Point,
    /// Local size factor in `(0, 1]`.
    pub factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Maximum displacement of a free interior vertex, as a fraction of the
    /// grid spacing.
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Grid cells per unit feature length: per `pi` for the square, per
    /// `pi/2` for the domains whose geometry has features at `pi/2`.
    pub n: usize,
    #[serde(default)]
    pub grading: Option<Grading>,
    #[serde(default)]
    pub jitter: Option<Jitter>,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, n: usize) -> Self {
        DomainSpec {
            kind,
            n,
            grading: None,
            jitter: None,
        }
    }

    pub fn graded(mut self, point: Point, factor: f64) -> Self {
        self.grading = Some(Grading { point, factor });
        self
    }

    pub fn with_jitter(mut self, amplitude: f64, seed: u64) -> Self {
        self.jitter = Some(Jitter { amplitude, seed });
        self
    }
}

pub(crate) fn validate_factor(rf: f64) -> Result<(), MeshError> {
    if rf.is_finite() && rf > 0.0 && rf <= 1.0 {
        Ok(())
    } else {
        Err(MeshError::InvalidRefinementFactor(rf))
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn unit(a: Point) -> Point {
    let n = norm(a);
    [a[0] / n, a[1] / n]
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn diameter(vertices: &[Point], t: &[usize; 3]) -> f64 {
    (0..3)
        .map(|k| norm(sub(vertices[t[(k + 1) % 3]], vertices[t[k]])))
        .fold(0.0, f64::max)
}

pub(crate) fn min_angle(p: &[Point; 3]) -> f64 {
    let mut best = 180.0_f64;
    for k in 0..3 {
        let u = sub(p[(k + 1) % 3], p[k]);
        let v = sub(p[(k + 2) % 3], p[k]);
        let c = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
        best = best.min(c.clamp(-1.0, 1.0).acos().to_degrees());
    }
    best
}

/// Euclidean distance from `p` to the closed triangle `tri`.
pub(crate) fn point_triangle_distance(p: Point, tri: &[Point; 3]) -> f64 {
    let inside = (0..3).all(|k| signed_area(tri[k], tri[(k + 1) % 3], p) >= 0.0);
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|k| point_segment_distance(p, tri[k], tri[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm([ap[0] - s * ab[0], ap[1] - s * ab[1]])
}

/// Groups vertices with bitwise identical coordinates into crack pairs.
pub(crate) fn coincident_pairs(vertices: &[Point]) -> Vec<[usize; 2]> {
    let mut by_coord: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        by_coord
            .entry((p[0].to_bits(), p[1].to_bits()))
            .or_default()
            .push(i);
    }
    let mut pairs: Vec<[usize; 2]> = by_coord
        .into_values()
        .filter(|g| g.len() == 2)
        .map(|g| [g[0].min(g[1]), g[0].max(g[1])])
        .collect();
    pairs.sort_unstable();
    pairs
}
