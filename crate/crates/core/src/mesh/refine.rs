use std::cmp::Ordering;
use std::collections::HashMap;

use super::{
    coincident_pairs, diameter, edge_key, point_triangle_distance, validate_factor, Mesh, Point,
};
use crate::error::MeshError;

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Red refinement: every triangle is split into four similar children by
/// joining its edge midpoints.
///
/// Parent vertices keep their indices and coordinates; new midpoints are
/// appended. Midpoints are keyed by vertex pair, so the two faces of a crack
/// receive distinct (coincident) midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        *mids.entry(edge_key(a, b)).or_insert_with(|| {
            vertices.push(midpoint(vertices[a], vertices[b]));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut regions = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        regions.extend([mesh.region_tags[t]; 4]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let m = mid(e.v[0], e.v[1], &mut vertices);
        boundary.push(([e.v[0], m], e.tag));
        boundary.push(([m, e.v[1]], e.tag));
    }
    let cracks = coincident_pairs(&vertices);
    Mesh::from_parts(vertices, triangles, boundary, regions, cracks)
}

/// Local refinement toward `point` by longest-edge bisection.
///
/// Pass `p = 1..=ceil(log2(1/rf))` bisects every element that touches the
/// ball of radius `h0 / 2^(p-1)` around `point` until its diameter is at most
/// `h0 / 2^p`, where `h0` is the input `h_max`. Neighbours are bisected along
/// the longest-edge propagation path, so the result is conforming without
/// hanging nodes. `rf = 1` returns the mesh unchanged.
pub fn refine_toward(mesh: &Mesh, point: Point, rf: f64) -> Result<Mesh, MeshError> {
    validate_factor(rf)?;
    let on_domain = (0..mesh.n_triangles())
        .any(|t| point_triangle_distance(point, &mesh.triangle_points(t)) <= 1e-9);
    if !on_domain {
        return Err(MeshError::Invalid(format!(
            "grading point ({}, {}) is outside the meshed domain",
            point[0], point[1]
        )));
    }
    if rf == 1.0 {
        return Ok(mesh.clone());
    }
    let passes = (1.0 / rf).log2().ceil().max(1.0) as u32;
    let h0 = mesh.h_max();
    let mut work = Bisector::new(mesh);
    for p in 1..=passes {
        let radius = h0 / 2f64.powi(p as i32 - 1);
        let target = h0 / 2f64.powi(p as i32) * (1.0 + 1e-12);
        loop {
            let marked: Vec<usize> = (0..work.tris.len())
                .filter(|&t| work.alive[t])
                .filter(|&t| diameter(&work.vertices, &work.tris[t]) > target)
                .filter(|&t| point_triangle_distance(point, &work.points(t)) <= radius)
                .collect();
            if marked.is_empty() {
                break;
            }
            for t in marked {
                work.refine(t);
            }
        }
    }
    Ok(work.finish())
}

/// Mutable triangulation supporting conforming longest-edge bisection.
struct Bisector {
    vertices: Vec<Point>,
    tris: Vec<[usize; 3]>,
    alive: Vec<bool>,
    regions: Vec<u32>,
    edge_tris: HashMap<(usize, usize), Vec<usize>>,
    mids: HashMap<(usize, usize), usize>,
    boundary_tags: HashMap<(usize, usize), u32>,
}

impl Bisector {
    fn new(mesh: &Mesh) -> Self {
        let mut b = Bisector {
            vertices: mesh.vertices.clone(),
            tris: Vec::new(),
            alive: Vec::new(),
            regions: Vec::new(),
            edge_tris: HashMap::new(),
            mids: HashMap::new(),
            boundary_tags: mesh
                .boundary_edges
                .iter()
                .map(|e| (edge_key(e.v[0], e.v[1]), e.tag))
                .collect(),
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            b.push(*tri, mesh.region_tags[t]);
        }
        b
    }

    fn points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.tris[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn push(&mut self, tri: [usize; 3], region: u32) -> usize {
        let id = self.tris.len();
        self.tris.push(tri);
        self.alive.push(true);
        self.regions.push(region);
        for k in 0..3 {
            self.edge_tris
                .entry(edge_key(tri[k], tri[(k + 1) % 3]))
                .or_default()
                .push(id);
        }
        id
    }

    fn kill(&mut self, t: usize) {
        self.alive[t] = false;
        let tri = self.tris[t];
        for k in 0..3 {
            if let Some(list) = self.edge_tris.get_mut(&edge_key(tri[k], tri[(k + 1) % 3])) {
                list.retain(|&x| x != t);
            }
        }
    }

    fn len2(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        dx * dx + dy * dy
    }

    /// Total order on edges: longer first, ties broken by the smaller key.
    fn edge_cmp(&self, e: (usize, usize), f: (usize, usize)) -> Ordering {
        self.len2(e.0, e.1)
            .partial_cmp(&self.len2(f.0, f.1))
            .unwrap_or(Ordering::Equal)
            .then_with(|| f.cmp(&e))
    }

    /// Local index `k` of the longest edge `(tri[k], tri[k+1])`.
    fn longest(&self, t: usize) -> usize {
        let tri = self.tris[t];
        let key = |k: usize| edge_key(tri[k], tri[(k + 1) % 3]);
        let mut best = 0;
        for k in 1..3 {
            if self.edge_cmp(key(k), key(best)) == Ordering::Greater {
                best = k;
            }
        }
        best
    }

    fn neighbor(&self, t: usize, key: (usize, usize)) -> Option<usize> {
        self.edge_tris
            .get(&key)
            .and_then(|l| l.iter().copied().find(|&x| x != t))
    }

    fn bisect(&mut self, t: usize, k: usize) {
        let tri = self.tris[t];
        let (a, b, apex) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
        let key = edge_key(a, b);
        let m = match self.mids.get(&key) {
            Some(&m) => m,
            None => {
                self.vertices
                    .push(midpoint(self.vertices[a], self.vertices[b]));
                let m = self.vertices.len() - 1;
                self.mids.insert(key, m);
                m
            }
        };
        let region = self.regions[t];
        self.kill(t);
        self.push([apex, a, m], region);
        self.push([apex, m, b], region);
        if let Some(tag) = self.boundary_tags.remove(&key) {
            self.boundary_tags.insert(edge_key(a, m), tag);
            self.boundary_tags.insert(edge_key(m, b), tag);
        }
    }

    /// Bisects `t`, first refining along its longest-edge propagation path.
    fn refine(&mut self, t: usize) {
        while self.alive[t] {
            let mut cur = t;
            loop {
                let k = self.longest(cur);
                let tri = self.tris[cur];
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                match self.neighbor(cur, key) {
                    None => {
                        self.bisect(cur, k);
                        break;
                    }
                    Some(nb) => {
                        let kn = self.longest(nb);
                        let ntri = self.tris[nb];
                        if edge_key(ntri[kn], ntri[(kn + 1) % 3]) == key {
                            self.bisect(cur, k);
                            self.bisect(nb, kn);
                            break;
                        }
                        cur = nb;
                    }
                }
            }
        }
    }

    fn finish(self) -> Mesh {
        let mut triangles = Vec::new();
        let mut regions = Vec::new();
        for t in 0..self.tris.len() {
            if self.alive[t] {
                triangles.push(self.tris[t]);
                regions.push(self.regions[t]);
            }
        }
        let mut boundary = Vec::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if let Some(&tag) = self.boundary_tags.get(&edge_key(a, b)) {
                    boundary.push(([a, b], tag));
                }
            }
        }
        let cracks = coincident_pairs(&self.vertices);
        Mesh::from_parts(self.vertices, triangles, boundary, regions, cracks)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::{generate, validate, DomainKind, DomainSpec};

    #[test]
    fn red_refinement_quadruples_and_halves() {
        let mesh = generate(&DomainSpec::new(DomainKind::Square, 1)).unwrap();
        let fine = refine_uniform(&mesh);
        assert_eq!(fine.n_triangles(), 8);
        assert_eq!(fine.h_max() / mesh.h_max(), 0.5);
        for k in 0..mesh.n_vertices() {
            assert_eq!(fine.vertices()[k], mesh.vertices()[k]);
        }
        assert!(validate(&fine).all_passed());
    }

    #[test]
    fn red_refinement_keeps_crack_and_regions() {
        let mesh = generate(&DomainSpec::new(DomainKind::Slit, 2)).unwrap();
        let fine = refine_uniform(&mesh);
        assert_eq!(fine.crack_pairs().len(), 2 * mesh.crack_pairs().len());
        assert!(validate(&fine).all_passed(), "{}", validate(&fine));
        let q = generate(&DomainSpec::new(DomainKind::Square4, 2)).unwrap();
        let qf = refine_uniform(&q);
        for group in qf.region_tags().chunks(4) {
            assert!(group.iter().all(|&g| g == group[0]));
        }
    }

    #[test]
    fn identity_factor_leaves_mesh_unchanged() {
        let mesh = generate(&DomainSpec::new(DomainKind::Lshape, 2)).unwrap();
        let same = refine_toward(&mesh, [PI / 2.0, PI / 2.0], 1.0).unwrap();
        assert_eq!(same, mesh);
        assert!(refine_toward(&mesh, [PI / 2.0, PI / 2.0], 1.5).is_err());
        assert!(refine_toward(&mesh, [0.1, 0.1], 0.5).is_err());
    }

    #[test]
    fn grading_refines_near_corner() {
        let corner = [PI / 2.0, PI / 2.0];
        let mesh = generate(&DomainSpec::new(DomainKind::Lshape, 2)).unwrap();
        let graded = refine_toward(&mesh, corner, 0.1).unwrap();
        let report = validate(&graded);
        assert!(report.all_passed(), "{report}");
        let far = mesh.h_max();
        let near_min = (0..graded.n_triangles())
            .filter(|&t| point_triangle_distance(corner, &graded.triangle_points(t)) <= 0.2)
            .map(|t| diameter(graded.vertices(), &graded.triangles()[t]))
            .fold(f64::INFINITY, f64::min);
        assert!(near_min <= 0.12 * far, "{near_min} vs {far}");
        assert!(graded.vertices().contains(&corner));
        assert!(graded.min_angle_deg() >= 44.999);
    }

    #[test]
    fn grading_preserves_crack() {
        let tip = [PI / 2.0, PI / 2.0];
        let mesh = generate(&DomainSpec::new(DomainKind::Slit, 2)).unwrap();
        let graded = refine_toward(&mesh, tip, 0.01).unwrap();
        let report = validate(&graded);
        assert!(report.all_passed(), "{report}");
        assert!(graded.crack_pairs().len() > mesh.crack_pairs().len());
        // the tip itself is never duplicated
        assert_eq!(graded.vertices().iter().filter(|p| **p == tip).count(), 1);
        for [a, b] in graded.crack_pairs() {
            assert_ne!(a, b);
            let share = graded
                .triangles()
                .iter()
                .any(|t| t.contains(a) && t.contains(b));
            assert!(!share);
        }
    }
}
