use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{edge_key, refine_toward, tag, validate_factor, DomainKind, DomainSpec, Mesh, Point};
use crate::error::MeshError;

const GEOM_EPS: f64 = 1e-12;

/// Builds the structured base triangulation of `spec`, then applies the
/// optional grading.
///
/// Each grid cell is split along its `(0,0)-(1,1)` diagonal. Grid lines run
/// through `pi/2` for every domain except the plain square, so the
/// re-entrant corner, the slit and the material interfaces are resolved
/// exactly.
pub fn generate(spec: &DomainSpec) -> Result<Mesh, MeshError> {
    if spec.n == 0 {
        return Err(MeshError::ZeroSubdivision);
    }
    if let Some(g) = &spec.grading {
        validate_factor(g.factor)?;
    }
    let m = match spec.kind {
        DomainKind::Square => spec.n,
        _ => 2 * spec.n,
    };
    let half = m / 2;
    let has_midlines = spec.kind != DomainKind::Square;
    let stride = m + 1;
    let g = |i: usize, j: usize| j * stride + i;
    let coord = |i: usize| PI * (i as f64 / m as f64);

    let mut grid: Vec<Point> = Vec::with_capacity(stride * stride);
    for j in 0..=m {
        for i in 0..=m {
            grid.push([coord(i), coord(j)]);
        }
    }

    if let Some(jit) = &spec.jitter {
        let spacing = PI / m as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(jit.seed);
        let is_feature = |k: usize| k == 0 || k == m || (has_midlines && k == half);
        for j in 0..=m {
            for i in 0..=m {
                let dx: f64 = rng.random_range(-1.0..1.0);
                let dy: f64 = rng.random_range(-1.0..1.0);
                if is_feature(i) || is_feature(j) {
                    continue;
                }
                let p = &mut grid[g(i, j)];
                p[0] += jit.amplitude * spacing * dx;
                p[1] += jit.amplitude * spacing * dy;
            }
        }
    }

    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut regions: Vec<u32> = Vec::new();
    // (cell column, cell row) for every triangle, needed for the slit remap
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for j in 0..m {
        for i in 0..m {
            if spec.kind == DomainKind::Lshape && i < half && j < half {
                continue;
            }
            let region = match spec.kind {
                DomainKind::Square4 => match (i < half, j < half) {
                    (true, true) => 1,
                    (false, false) => 2,
                    (false, true) => 3,
                    (true, false) => 4,
                },
                _ => 1,
            };
            let (p00, p10, p01, p11) = (g(i, j), g(i + 1, j), g(i, j + 1), g(i + 1, j + 1));
            tris.push([p00, p10, p11]);
            tris.push([p00, p11, p01]);
            regions.extend([region, region]);
            cells.extend([(i, j), (i, j)]);
        }
    }

    // compact away grid vertices not used by any triangle (L-shape hole)
    let mut new_index = vec![usize::MAX; grid.len()];
    let mut vertices = Vec::new();
    for t in &tris {
        for &v in t {
            if new_index[v] == usize::MAX {
                new_index[v] = usize::MAX - 1;
            }
        }
    }
    for (old, slot) in new_index.iter_mut().enumerate() {
        if *slot == usize::MAX - 1 {
            *slot = vertices.len();
            vertices.push(grid[old]);
        }
    }
    for t in tris.iter_mut() {
        for v in t.iter_mut() {
            *v = new_index[*v];
        }
    }

    let mut crack_pairs = Vec::new();
    if spec.kind == DomainKind::Slit {
        // duplicate the slit nodes right of the tip, including the endpoint
        // on the outer wall; the tip stays single
        let mut twin_of: HashMap<usize, usize> = HashMap::new();
        for i in (half + 1)..=m {
            let orig = new_index[g(i, half)];
            let twin = vertices.len();
            vertices.push(vertices[orig]);
            twin_of.insert(orig, twin);
            crack_pairs.push([orig, twin]);
        }
        for (t, &(ci, cj)) in tris.iter_mut().zip(&cells) {
            if ci >= half && cj >= half {
                for v in t.iter_mut() {
                    if let Some(&tw) = twin_of.get(v) {
                        *v = tw;
                    }
                }
            }
        }
    }

    let boundary = boundary_from_topology(&vertices, &tris, spec.kind);
    let mesh = Mesh::from_parts(vertices, tris, boundary, regions, crack_pairs);
    match &spec.grading {
        Some(gr) => refine_toward(&mesh, gr.point, gr.factor),
        None => Ok(mesh),
    }
}

/// Edges owned by a single triangle, tagged by their geometric position.
fn boundary_from_topology(
    vertices: &[Point],
    tris: &[[usize; 3]],
    kind: DomainKind,
) -> Vec<([usize; 2], u32)> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in tris {
        for k in 0..3 {
            *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for t in tris {
        let centroid_y = (vertices[t[0]][1] + vertices[t[1]][1] + vertices[t[2]][1]) / 3.0;
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&edge_key(a, b)] != 1 {
                continue;
            }
            let mid = [
                0.5 * (vertices[a][0] + vertices[b][0]),
                0.5 * (vertices[a][1] + vertices[b][1]),
            ];
            out.push(([a, b], classify_edge(mid, centroid_y, kind)));
        }
    }
    out
}

fn classify_edge(mid: Point, owner_centroid_y: f64, kind: DomainKind) -> u32 {
    let near = |a: f64, b: f64| (a - b).abs() < GEOM_EPS;
    if near(mid[1], 0.0) {
        tag::BOTTOM
    } else if near(mid[0], PI) {
        tag::RIGHT
    } else if near(mid[1], PI) {
        tag::TOP
    } else if near(mid[0], 0.0) {
        tag::LEFT
    } else if kind == DomainKind::Slit {
        if owner_centroid_y < mid[1] {
            tag::SLIT_LOWER
        } else {
            tag::SLIT_UPPER
        }
    } else {
        tag::REENTRANT
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate;

    #[test]
    fn square_n1_is_two_triangles() {
        let mesh = generate(&DomainSpec::new(DomainKind::Square, 1)).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_triangles(), 2);
        assert_eq!(mesh.boundary_edges().len(), 4);
    }

    #[test]
    fn square_n2_satisfies_euler() {
        let mesh = generate(&DomainSpec::new(DomainKind::Square, 2)).unwrap();
        assert_eq!(mesh.n_vertices(), 9);
        assert_eq!(mesh.n_triangles(), 8);
        let v = mesh.n_vertices() as i64;
        let e = mesh.edges().len() as i64;
        let f = mesh.n_triangles() as i64 + 1;
        assert_eq!(v - e + f, 2);
    }

    #[test]
    fn rejects_zero_subdivision_and_bad_factor() {
        assert!(matches!(
            generate(&DomainSpec::new(DomainKind::Square, 0)),
            Err(MeshError::ZeroSubdivision)
        ));
        let spec = DomainSpec::new(DomainKind::Lshape, 2).graded([PI / 2.0, PI / 2.0], 0.0);
        assert!(matches!(
            generate(&spec),
            Err(MeshError::InvalidRefinementFactor(_))
        ));
        let spec = DomainSpec::new(DomainKind::Lshape, 2).graded([PI / 2.0, PI / 2.0], -0.5);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn lshape_excludes_lower_left_quadrant() {
        let mesh = generate(&DomainSpec::new(DomainKind::Lshape, 2)).unwrap();
        let quarter = PI / 2.0;
        for t in 0..mesh.n_triangles() {
            let p = mesh.triangle_points(t);
            let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
            let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
            assert!(!(cx < quarter && cy < quarter));
        }
        assert!((mesh.area() - 0.75 * PI * PI).abs() < 1e-12);
        assert!(mesh.vertices().contains(&[quarter, quarter]));
        assert!(validate(&mesh).all_passed());
    }

    #[test]
    fn slit_duplicates_nodes_on_the_segment() {
        let mesh = generate(&DomainSpec::new(DomainKind::Slit, 4)).unwrap();
        // independent enumeration: grid spacing pi/8, slit nodes at x = k pi/8
        let m = 8;
        for k in 0..=m {
            let x = PI * (k as f64 / m as f64);
            let y = PI / 2.0;
            let copies = mesh
                .vertices()
                .iter()
                .filter(|p| p[0] == x && p[1] == y)
                .count();
            let expected = if k > m / 2 { 2 } else { 1 };
            assert_eq!(copies, expected, "x = {x}");
        }
        assert_eq!(mesh.crack_pairs().len(), m / 2);
        for e in mesh.boundary_edges() {
            if e.tag == tag::SLIT_UPPER || e.tag == tag::SLIT_LOWER {
                assert_eq!(mesh.vertices()[e.v[0]][1], PI / 2.0);
            }
        }
        let upper: Vec<_> = mesh
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == tag::SLIT_UPPER)
            .collect();
        let lower: Vec<_> = mesh
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == tag::SLIT_LOWER)
            .collect();
        assert_eq!(upper.len(), m / 2);
        assert_eq!(lower.len(), m / 2);
        // the two copies of each slit node sit on opposite faces
        for [a, b] in mesh.crack_pairs() {
            let on = |v: usize, edges: &[&crate::mesh::BoundaryEdge]| {
                edges.iter().any(|e| e.v.contains(&v))
            };
            assert!(on(*a, &lower) && !on(*a, &upper));
            assert!(on(*b, &upper) && !on(*b, &lower));
        }
        assert!(validate(&mesh).all_passed(), "{}", validate(&mesh));
    }

    #[test]
    fn square4_regions_match_quadrants() {
        let mesh = generate(&DomainSpec::new(DomainKind::Square4, 3)).unwrap();
        let h = PI / 2.0;
        for t in 0..mesh.n_triangles() {
            let p = mesh.triangle_points(t);
            let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
            let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
            let expected = match (cx < h, cy < h) {
                (true, true) => 1,
                (false, false) => 2,
                (false, true) => 3,
                (true, false) => 4,
            };
            assert_eq!(mesh.region_tags()[t], expected);
            let xs = p.iter().map(|q| q[0]);
            let ys = p.iter().map(|q| q[1]);
            // no triangle straddles an interface
            let straddle_x = xs.clone().any(|x| x < h) && xs.clone().any(|x| x > h);
            let straddle_y = ys.clone().any(|y| y < h) && ys.clone().any(|y| y > h);
            assert!(!straddle_x && !straddle_y);
        }
    }

    #[test]
    fn jitter_is_seeded_and_keeps_mesh_valid() {
        let spec = DomainSpec::new(DomainKind::Square, 6).with_jitter(0.15, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let plain = generate(&DomainSpec::new(DomainKind::Square, 6)).unwrap();
        assert_ne!(a.vertices(), plain.vertices());
        let report = validate(&a);
        assert!(report.all_passed(), "{report}");
    }
}
