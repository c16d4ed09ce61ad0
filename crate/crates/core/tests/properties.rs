use enclosure_fem::assembly::{assemble, MaterialCoefficients};
use enclosure_fem::eigsolve::{inertia, solve};
use enclosure_fem::enclosure::{bounds_at, Side};
use enclosure_fem::fespace::build_space;
use enclosure_fem::io::{mesh_from_json, mesh_to_json, read_json, report_csv, to_json, write_json};
use enclosure_fem::mesh::{
    generate, refine_toward, refine_uniform, validate, DomainKind, DomainSpec,
};
use enclosure_fem::sparse::Envelope;
use enclosure_fem::{run_procedure, EnclosureReport, FormMatrices};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kind() -> impl Strategy<Value = DomainKind> {
    prop_oneof![
        Just(DomainKind::Square),
        Just(DomainKind::Lshape),
        Just(DomainKind::Slit),
        Just(DomainKind::Square4)
    ]
}

fn matrices(kind: DomainKind, n: usize, r: usize) -> FormMatrices {
    let space = build_space(generate(&DomainSpec::new(kind, n)).unwrap(), r).unwrap();
    assemble(space, &MaterialCoefficients::for_domain(kind)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn assembled_matrices_are_symmetric_and_definite(k in kind(), n in 1usize..=2, r in 1usize..=3) {
        let fm = matrices(k, n, r);
        prop_assert_eq!(fm.a.asymmetry(), 0.0);
        prop_assert_eq!(fm.b.asymmetry(), 0.0);
        prop_assert_eq!(fm.c.asymmetry(), 0.0);
        prop_assert!(Envelope::cholesky(&fm.b, fm.ordering().clone()).is_ok());
        let eig = fm.c.to_dense().symmetric_eigenvalues();
        let max = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(eig.iter().all(|&v| v >= -1e-12 * max));
    }

    #[test]
    fn galerkin_spectrum_is_symmetric_about_zero(k in kind(), n in 1usize..=2, r in 1usize..=2) {
        let fm = matrices(k, n, r);
        let s = solve(&fm.a.to_dense(), &fm.b.to_dense(), 1e-8).unwrap();
        prop_assert_eq!(s.tau_pos.len(), s.tau_neg.len());
        let scale = s.tau_pos.first().copied().unwrap_or(1.0);
        for (p, q) in s.tau_pos.iter().zip(&s.tau_neg) {
            prop_assert!((p + q).abs() <= 1e-9 * scale, "{} vs {}", p, q);
        }
    }

    #[test]
    fn refinement_never_loosens_bounds(n in 1usize..=2, r in 1usize..=2, t_up in 0.2f64..0.9, t_low in 2.05f64..2.2) {
        let coarse = generate(&DomainSpec::new(DomainKind::Square, n)).unwrap();
        let fine = refine_uniform(&coarse);
        let vac = MaterialCoefficients::vacuum();
        let a = assemble(build_space(coarse, r).unwrap(), &vac).unwrap();
        let b = assemble(build_space(fine, r).unwrap(), &vac).unwrap();
        if let (Ok(ua), Ok(ub)) = (bounds_at(&a, t_up, Side::Upper, t_low), bounds_at(&b, t_up, Side::Upper, t_low)) {
            prop_assert!(ub.len() >= ua.len());
            for (x, y) in ua.rho.iter().zip(&ub.rho) {
                prop_assert!(*y <= x + 1e-10);
            }
        }
        if let (Ok(la), Ok(lb)) = (bounds_at(&a, t_low, Side::Lower, t_up), bounds_at(&b, t_low, Side::Lower, t_up)) {
            for (x, y) in la.rho.iter().zip(&lb.rho) {
                prop_assert!(*y >= x - 1e-10);
            }
        }
    }

    #[test]
    fn tangential_trace_vanishes(k in kind(), r in 1usize..=3, seed in any::<u64>()) {
        let space = build_space(generate(&DomainSpec::new(k, 2)).unwrap(), r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mesh = space.mesh().clone();
        for e in mesh.boundary_edges() {
            let (pa, pb) = (mesh.vertices()[e.v[0]], mesh.vertices()[e.v[1]]);
            for f in [0.13, 0.5, 0.77] {
                let p = [pa[0] + f * (pb[0] - pa[0]), pa[1] + f * (pb[1] - pa[1])];
                if let Some(v) = space.evaluate(&x, p) {
                    let tang = v.value[0] * e.tangent[0] + v.value[1] * e.tangent[1];
                    prop_assert!(tang.abs() <= 1e-12, "trace {} on tag {}", tang, e.tag);
                }
            }
        }
    }

    #[test]
    fn refinement_is_nested(k in kind(), n in 1usize..=3, amp in 0.0f64..0.3, seed in any::<u64>()) {
        let mesh = generate(&DomainSpec::new(k, n).with_jitter(amp, seed)).unwrap();
        let fine = refine_uniform(&mesh);
        prop_assert_eq!(fine.n_triangles(), 4 * mesh.n_triangles());
        prop_assert_eq!(&fine.vertices()[..mesh.n_vertices()], mesh.vertices());
        prop_assert!((fine.area() - mesh.area()).abs() <= 1e-12 * mesh.area());
        prop_assert!(validate(&fine).all_passed());
        // every fine vertex lies in the closure of some coarse triangle
        for p in fine.vertices() {
            let inside = (0..mesh.n_triangles()).any(|t| {
                let [a, b, c] = mesh.triangle_points(t);
                let d = |u: [f64; 2], v: [f64; 2]| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
                let s = [d(a, b), d(b, c), d(c, a)];
                let tol = 1e-12 * mesh.h_max() * mesh.h_max();
                s.iter().all(|v| *v >= -tol) || s.iter().all(|v| *v <= tol)
            });
            prop_assert!(inside);
        }
    }

    #[test]
    fn graded_meshes_stay_valid(k in kind(), rf in 0.05f64..1.0) {
        let mesh = generate(&DomainSpec::new(k, 2)).unwrap();
        let g = refine_toward(&mesh, k.singular_point(), rf).unwrap();
        prop_assert!(validate(&g).all_passed());
        prop_assert!((g.area() - mesh.area()).abs() <= 1e-12 * mesh.area());
        prop_assert!(g.n_triangles() >= mesh.n_triangles());
    }

    #[test]
    fn mesh_and_spec_round_trip_through_json(k in kind(), n in 1usize..=3, amp in 0.0f64..0.3, seed in any::<u64>()) {
        let spec = DomainSpec::new(k, n).with_jitter(amp, seed);
        let mesh = generate(&spec).unwrap();
        prop_assert_eq!(mesh_from_json(&mesh_to_json(&mesh)).unwrap(), mesh);
        let back: DomainSpec = serde_json::from_str(&to_json(&spec)).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn inertia_counts_add_up(n in 1usize..=30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let s = &m + m.transpose();
        let (neg, zero, pos) = inertia(&s);
        prop_assert_eq!(neg + zero + pos, n);
        let eig = s.symmetric_eigenvalues();
        prop_assert_eq!(neg, eig.iter().filter(|v| **v < 0.0).count());
    }
}

#[test]
fn report_round_trips_through_json() {
    let rep = run_procedure(
        &DomainSpec::new(DomainKind::Square, 2),
        &MaterialCoefficients::vacuum(),
        1,
        0.5,
        1.2,
        1e-2,
        6,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    write_json(&p, &rep).unwrap();
    let back: EnclosureReport = read_json(&p).unwrap();
    assert_eq!(back.enclosures, rep.enclosures);
    assert_eq!(report_csv(&back), report_csv(&rep));
    assert_eq!(to_json(&back), to_json(&rep));
}
