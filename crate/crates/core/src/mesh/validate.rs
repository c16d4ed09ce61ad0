use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{diameter, edge_key, min_angle, point_segment_distance, tag, Mesh};

pub const DEFAULT_MIN_ANGLE_DEG: f64 = 15.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of every mesh invariant check plus summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshReport {
    pub checks: Vec<CheckResult>,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_boundary_edges: usize,
    pub n_crack_pairs: usize,
    pub min_angle_deg: f64,
    pub h_max: f64,
}

impl MeshReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for MeshReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            writeln!(f, "{status:4}  {:<16} {}", c.name, c.detail)?;
        }
        writeln!(
            f,
            "vertices {}  triangles {}  boundary edges {}  crack pairs {}",
            self.n_vertices, self.n_triangles, self.n_boundary_edges, self.n_crack_pairs
        )?;
        write!(
            f,
            "min angle {:.4} deg  h_max {:.6e}",
            self.min_angle_deg, self.h_max
        )
    }
}

/// Checks all mesh invariants with the default minimum-angle floor.
pub fn validate(mesh: &Mesh) -> MeshReport {
    validate_with(mesh, DEFAULT_MIN_ANGLE_DEG)
}

/// Checks all mesh invariants. Failures are reported, never raised.
pub fn validate_with(mesh: &Mesh, min_angle_floor: f64) -> MeshReport {
    let nv = mesh.n_vertices();
    let mut checks = Vec::new();

    let bad_tris: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| mesh.triangles[t].iter().any(|&v| v >= nv))
        .collect();
    let bad_edges = mesh
        .boundary_edges
        .iter()
        .filter(|e| e.v.iter().any(|&v| v >= nv))
        .count();
    let bad_pairs = mesh
        .crack_pairs
        .iter()
        .filter(|p| p.iter().any(|&v| v >= nv))
        .count();
    checks.push(CheckResult {
        name: "index_range",
        passed: bad_tris.is_empty() && bad_edges == 0 && bad_pairs == 0,
        detail: if bad_tris.is_empty() && bad_edges == 0 && bad_pairs == 0 {
            "all indices in range".into()
        } else {
            format!(
                "{} triangles, {bad_edges} boundary edges, {bad_pairs} crack pairs out of range",
                bad_tris.len()
            )
        },
    });
    let in_range = |t: usize| mesh.triangles[t].iter().all(|&v| v < nv);

    let inverted: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| {
            in_range(t)
                && mesh.signed_area(t).partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        })
        .collect();
    checks.push(CheckResult {
        name: "positive_area",
        passed: inverted.is_empty(),
        detail: if inverted.is_empty() {
            "all triangles counterclockwise with positive area".into()
        } else {
            let list: Vec<String> = inverted.iter().take(10).map(|t| t.to_string()).collect();
            format!(
                "non-positive signed area in triangle(s) {}",
                list.join(", ")
            )
        },
    });

    checks.push(conformity(mesh));
    checks.push(crack_integrity(mesh));

    let recomputed = (0..mesh.n_triangles())
        .filter(|&t| in_range(t))
        .map(|t| diameter(&mesh.vertices, &mesh.triangles[t]))
        .fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "h_max",
        passed: recomputed == mesh.h_max,
        detail: format!("stored {:.6e}, recomputed {:.6e}", mesh.h_max, recomputed),
    });

    let angle = (0..mesh.n_triangles())
        .filter(|&t| in_range(t))
        .map(|t| min_angle(&mesh.triangle_points(t)))
        .fold(180.0, f64::min);
    checks.push(CheckResult {
        name: "min_angle",
        passed: angle >= min_angle_floor,
        detail: format!("{angle:.4} deg (floor {min_angle_floor} deg)"),
    });

    let tags_ok = mesh.region_tags.len() == mesh.n_triangles();
    checks.push(CheckResult {
        name: "region_tags",
        passed: tags_ok,
        detail: format!(
            "{} tags for {} triangles",
            mesh.region_tags.len(),
            mesh.n_triangles()
        ),
    });

    MeshReport {
        checks,
        n_vertices: nv,
        n_triangles: mesh.n_triangles(),
        n_boundary_edges: mesh.boundary_edges.len(),
        n_crack_pairs: mesh.crack_pairs.len(),
        min_angle_deg: angle,
        h_max: mesh.h_max,
    }
}

fn conformity(mesh: &Mesh) -> CheckResult {
    let nv = mesh.n_vertices();
    let mut owners: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &mesh.triangles {
        if t.iter().any(|&v| v >= nv) {
            continue;
        }
        for k in 0..3 {
            *owners.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut problems = Vec::new();
    let over = owners.values().filter(|&&c| c > 2).count();
    if over > 0 {
        problems.push(format!("{over} edges shared by more than two triangles"));
    }
    let listed: HashSet<(usize, usize)> = mesh
        .boundary_edges
        .iter()
        .map(|e| edge_key(e.v[0], e.v[1]))
        .collect();
    let wrong_owner = listed
        .iter()
        .filter(|k| owners.get(k).copied().unwrap_or(0) != 1)
        .count();
    if wrong_owner > 0 {
        problems.push(format!(
            "{wrong_owner} boundary edges not owned by exactly one triangle"
        ));
    }
    let unlisted = owners
        .iter()
        .filter(|(k, &c)| c == 1 && !listed.contains(k))
        .count();
    if unlisted > 0 {
        problems.push(format!(
            "{unlisted} single-owner edges missing from the boundary list"
        ));
    }
    let hanging = hanging_nodes(mesh, &owners);
    if hanging > 0 {
        problems.push(format!("{hanging} hanging nodes"));
    }
    CheckResult {
        name: "conformity",
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{} edges, no hanging nodes", owners.len())
        } else {
            problems.join("; ")
        },
    }
}

/// Counts vertices lying strictly inside a single-owner edge. A slit face may
/// legitimately contain vertices of the opposite face, so those are skipped.
fn hanging_nodes(mesh: &Mesh, owners: &HashMap<(usize, usize), usize>) -> usize {
    let nv = mesh.n_vertices();
    if nv == 0 {
        return 0;
    }
    let face_tag: HashMap<(usize, usize), u32> = mesh
        .boundary_edges
        .iter()
        .map(|e| (edge_key(e.v[0], e.v[1]), e.tag))
        .collect();
    let mut vertex_faces: HashMap<usize, Vec<u32>> = HashMap::new();
    for e in &mesh.boundary_edges {
        for &v in &e.v {
            vertex_faces.entry(v).or_default().push(e.tag);
        }
    }

    // uniform bucket grid over the bounding box
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &mesh.vertices {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let cell = (mesh.h_max.max(1e-300)).max((hi[0] - lo[0]).max(hi[1] - lo[1]) / 4096.0);
    let key = |p: [f64; 2]| {
        (
            ((p[0] - lo[0]) / cell) as i64,
            ((p[1] - lo[1]) / cell) as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in mesh.vertices.iter().enumerate() {
        buckets.entry(key(*p)).or_default().push(i);
    }

    let mut count = 0;
    for (&(a, b), &c) in owners {
        if c != 1 {
            continue;
        }
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let tol = 1e-10 * len.max(1e-300);
        let (ka, kb) = (key(pa), key(pb));
        let tag_e = face_tag.get(&(a, b)).copied();
        let slit_face = matches!(tag_e, Some(tag::SLIT_LOWER) | Some(tag::SLIT_UPPER));
        for bx in ka.0.min(kb.0) - 1..=ka.0.max(kb.0) + 1 {
            for by in ka.1.min(kb.1) - 1..=ka.1.max(kb.1) + 1 {
                let Some(list) = buckets.get(&(bx, by)) else {
                    continue;
                };
                for &v in list {
                    if v == a || v == b {
                        continue;
                    }
                    let p = mesh.vertices[v];
                    if p == pa || p == pb {
                        continue;
                    }
                    if point_segment_distance(p, pa, pb) > tol {
                        continue;
                    }
                    if slit_face {
                        let same_face = vertex_faces
                            .get(&v)
                            .is_some_and(|tags| tags.iter().any(|&t| Some(t) == tag_e));
                        if !same_face {
                            continue;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    count
}

fn crack_integrity(mesh: &Mesh) -> CheckResult {
    let nv = mesh.n_vertices();
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            edges.insert(edge_key(t[k], t[(k + 1) % 3]));
        }
    }
    let used: HashSet<usize> = mesh.triangles.iter().flatten().copied().collect();
    for &[a, b] in &mesh.crack_pairs {
        if a >= nv || b >= nv {
            continue;
        }
        if a == b {
            problems.push(format!("pair ({a}, {b}) is not duplicated"));
            continue;
        }
        if mesh.vertices[a] != mesh.vertices[b] {
            problems.push(format!("pair ({a}, {b}) is not coincident"));
        }
        if !seen.insert(a) || !seen.insert(b) {
            problems.push(format!("vertex of pair ({a}, {b}) appears in another pair"));
        }
        if !used.contains(&a) || !used.contains(&b) {
            problems.push(format!("pair ({a}, {b}) has an unused copy"));
        }
        if edges.contains(&edge_key(a, b)) {
            problems.push(format!("pair ({a}, {b}) is joined by an edge"));
        }
    }
    let twin: HashMap<usize, usize> = mesh
        .crack_pairs
        .iter()
        .flat_map(|&[a, b]| [(a, b), (b, a)])
        .collect();
    for t in &mesh.triangles {
        for &v in t {
            if let Some(&w) = twin.get(&v) {
                if t.contains(&w) {
                    problems.push(format!("triangle {t:?} uses both copies {v} and {w}"));
                }
            }
        }
    }
    let total = problems.len();
    problems.truncate(5);
    CheckResult {
        name: "crack_integrity",
        passed: total == 0,
        detail: if total == 0 {
            format!("{} crack pairs intact", mesh.crack_pairs.len())
        } else {
            format!("{total} problems: {}", problems.join("; "))
        },
    }
}
