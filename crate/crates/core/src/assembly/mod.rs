//! Galerkin matrices of the three forms behind every shifted pencil.
//!
//! With `H` replaced by `iH` the cavity system becomes the real symmetric
//! first-order problem `curl E = w mu H`, `curl H = w eps E`. For trial and
//! test fields `u = (E, H)`, `v = (F, G)` in the discrete space:
//!
//! * `a(u, v) = int curl E . G + curl F . H` (mixed curl form; the term
//!   `int curl H . F` is integrated by parts, which is exact because
//!   `F . t = 0` on the boundary),
//! * `b(u, v) = int eps E . F + mu H G`,
//! * `c(u, v) = int mu^-1 curl E curl F + eps^-1 grad H . grad G`.
//!
//! The pencil at shift `t` is `L = A - tB`, `R = C - 2tA + t^2 B`, so one
//! assembly serves every `t`.

pub mod quadrature;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AssemblyError;
use crate::fespace::{FeSpace, LagrangeBasis, LocalBasis};
use crate::mesh::DomainKind;
use crate::sparse::{Pattern, SymCsr};
use quadrature::quadrature;

/// Piecewise constant permittivity and permeability per region tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialCoefficients {
    pub eps: BTreeMap<u32, f64>,
    pub mu: BTreeMap<u32, f64>,
}

impl MaterialCoefficients {
    /// The same `eps` and `mu` on every listed region.
    pub fn uniform(eps: f64, mu: f64, tags: &[u32]) -> Self {
        MaterialCoefficients {
            eps: tags.iter().map(|&t| (t, eps)).collect(),
            mu: tags.iter().map(|&t| (t, mu)).collect(),
        }
    }

    /// `eps = mu = 1` on region 1.
    pub fn vacuum() -> Self {
        Self::uniform(1.0, 1.0, &[1])
    }

    /// `mu = 1`; `eps = 1` on the lower-left and upper-right quadrants,
    /// `eps = 1/2` on the other two.
    pub fn transmission() -> Self {
        MaterialCoefficients {
            eps: [(1, 1.0), (2, 1.0), (3, 0.5), (4, 0.5)]
                .into_iter()
                .collect(),
            mu: (1..=4).map(|t| (t, 1.0)).collect(),
        }
    }

    /// Default materials of a benchmark domain.
    pub fn for_domain(kind: DomainKind) -> Self {
        match kind {
            DomainKind::Square4 => Self::transmission(),
            _ => Self::vacuum(),
        }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        for (name, map) in [("eps", &self.eps), ("mu", &self.mu)] {
            for (&tag, &value) in map {
                if !(value.is_finite() && value > 0.0) {
                    return Err(AssemblyError::NonPositiveCoefficient { name, tag, value });
                }
            }
        }
        Ok(())
    }

    /// `(eps, mu)` of a region.
    pub fn get(&self, tag: u32) -> Result<(f64, f64), AssemblyError> {
        match (self.eps.get(&tag), self.mu.get(&tag)) {
            (Some(&e), Some(&m)) => Ok((e, m)),
            _ => Err(AssemblyError::MissingRegion(tag)),
        }
    }
}

/// The matrices `A`, `B`, `C` on one space. They share one sparsity pattern
/// and a fill-reducing ordering reused by every factorization.
#[derive(Clone, Debug)]
pub struct FormMatrices {
    pub a: SymCsr,
    pub b: SymCsr,
    pub c: SymCsr,
    space: Arc<FeSpace>,
    ordering: Arc<Vec<usize>>,
}

impl FormMatrices {
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// Reverse Cuthill-McKee ordering of the shared pattern.
    pub fn ordering(&self) -> &Arc<Vec<usize>> {
        &self.ordering
    }

    pub fn h_max(&self) -> f64 {
        self.space.mesh().h_max()
    }
}

/// Shifted pencil `(L, R) = (A - tB, C - 2tA + t^2 B)`.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub l: SymCsr,
    pub r: SymCsr,
    pub t: f64,
    pub ordering: Arc<Vec<usize>>,
}

pub fn build_pencil(fm: &FormMatrices, t: f64) -> Pencil {
    let l = SymCsr::combine(&[(1.0, &fm.a), (-t, &fm.b)]);
    let r = SymCsr::combine(&[(1.0, &fm.c), (-2.0 * t, &fm.a), (t * t, &fm.b)]);
    Pencil {
        l,
        r,
        t,
        ordering: fm.ordering.clone(),
    }
}

/// Reference-element integrals of products of basis functions and their
/// derivatives, exact for affine elements.
struct ReferenceIntegrals {
    n: usize,
    /// `int phi_i phi_j`.
    mass: Vec<f64>,
    /// `dm[a][i*n+j] = int d_a phi_i phi_j`.
    dm: [Vec<f64>; 2],
    /// `dd[a][b][i*n+j] = int d_a phi_i d_b phi_j`.
    dd: [[Vec<f64>; 2]; 2],
}

impl ReferenceIntegrals {
    fn new(basis: &LagrangeBasis) -> Result<Self, AssemblyError> {
        let q = quadrature(2 * basis.order())?;
        let n = basis.len();
        let zero = || vec![0.0; n * n];
        let mut r = ReferenceIntegrals {
            n,
            mass: zero(),
            dm: [zero(), zero()],
            dd: [[zero(), zero()], [zero(), zero()]],
        };
        for (p, &w) in q.points.iter().zip(&q.weights) {
            let phi = basis.values(p[0], p[1]);
            let dphi = basis.gradients(p[0], p[1]);
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    r.mass[k] += w * phi[i] * phi[j];
                    for a in 0..2 {
                        r.dm[a][k] += w * dphi[i][a] * phi[j];
                        for b in 0..2 {
                            r.dd[a][b][k] += w * dphi[i][a] * dphi[j][b];
                        }
                    }
                }
            }
        }
        Ok(r)
    }
}

/// Element contribution: global dofs and the packed upper triangles of the
/// three local matrices.
struct ElementBlock {
    dofs: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

/// Assembles `A`, `B`, `C` on `space`.
///
/// Element blocks are computed in parallel and merged in element order, so
/// the result is bitwise independent of the thread count. Every local pair
/// is evaluated once and written to both `(i, j)` and `(j, i)`, which makes
/// the matrices exactly symmetric.
pub fn assemble(
    space: impl Into<Arc<FeSpace>>,
    mat: &MaterialCoefficients,
) -> Result<FormMatrices, AssemblyError> {
    let space = space.into();
    mat.validate()?;
    let mesh = space.mesh().clone();
    let mut coeff = Vec::with_capacity(mesh.n_triangles());
    for &tag in mesh.region_tags() {
        coeff.push(mat.get(tag)?);
    }
    let refs = ReferenceIntegrals::new(space.basis())?;

    let blocks: Vec<ElementBlock> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| element_block(&space, &refs, t, coeff[t]))
        .collect();

    let n = space.n_dofs();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for blk in &blocks {
        for &i in &blk.dofs {
            rows[i].extend_from_slice(&blk.dofs);
        }
    }
    let pattern = Arc::new(Pattern::from_rows(rows));
    let mut a = SymCsr::zeros(pattern.clone());
    let mut b = SymCsr::zeros(pattern.clone());
    let mut c = SymCsr::zeros(pattern.clone());
    for blk in &blocks {
        let nb = blk.dofs.len();
        let mut k = 0;
        for p in 0..nb {
            for q in p..nb {
                let (i, j) = (blk.dofs[p], blk.dofs[q]);
                for (m, v) in [(&mut a, blk.a[k]), (&mut b, blk.b[k]), (&mut c, blk.c[k])] {
                    m.add(i, j, v);
                    if i != j {
                        m.add(j, i, v);
                    }
                }
                k += 1;
            }
        }
    }
    let ordering = Arc::new(pattern.rcm());
    Ok(FormMatrices {
        a,
        b,
        c,
        space,
        ordering,
    })
}

fn element_block(
    space: &FeSpace,
    refs: &ReferenceIntegrals,
    t: usize,
    (eps, mu): (f64, f64),
) -> ElementBlock {
    let g = space.geometry(t);
    let n = refs.n;
    let det = g.det;
    let gm = g.inv_t;
    // physical integrals on this element
    let mass: Vec<f64> = refs.mass.iter().map(|v| det * v).collect();
    let mut grad_phi = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut stiff = [
        [vec![0.0; n * n], vec![0.0; n * n]],
        [vec![0.0; n * n], vec![0.0; n * n]],
    ];
    for k in 0..n * n {
        for p in 0..2 {
            grad_phi[p][k] = det * (gm[p][0] * refs.dm[0][k] + gm[p][1] * refs.dm[1][k]);
            for q in 0..2 {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s += gm[p][a] * gm[q][b] * refs.dd[a][b][k];
                    }
                }
                stiff[p][q][k] = det * s;
            }
        }
    }
    let local = space.local_basis(t);
    let nb = local.len();
    let packed = nb * (nb + 1) / 2;
    let (mut av, mut bv, mut cv) = (
        Vec::with_capacity(packed),
        Vec::with_capacity(packed),
        Vec::with_capacity(packed),
    );
    let idx = |i: usize, j: usize| i * n + j;
    for p in 0..nb {
        for q in p..nb {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            match (local[p], local[q]) {
                (
                    LocalBasis::E {
                        node: i, dir: du, ..
                    },
                    LocalBasis::E {
                        node: j, dir: dv, ..
                    },
                ) => {
                    let k = idx(i, j);
                    b = eps * (du[0] * dv[0] + du[1] * dv[1]) * mass[k];
                    c = (du[1] * dv[1] * stiff[0][0][k]
                        - du[1] * dv[0] * stiff[0][1][k]
                        - du[0] * dv[1] * stiff[1][0][k]
                        + du[0] * dv[0] * stiff[1][1][k])
                        / mu;
                }
                (
                    LocalBasis::E {
                        node: i, dir: du, ..
                    },
                    LocalBasis::H { node: j, .. },
                ) => {
                    let k = idx(i, j);
                    a = du[1] * grad_phi[0][k] - du[0] * grad_phi[1][k];
                }
                (
                    LocalBasis::H { node: i, .. },
                    LocalBasis::E {
                        node: j, dir: dv, ..
                    },
                ) => {
                    let k = idx(j, i);
                    a = dv[1] * grad_phi[0][k] - dv[0] * grad_phi[1][k];
                }
                (LocalBasis::H { node: i, .. }, LocalBasis::H { node: j, .. }) => {
                    let k = idx(i, j);
                    b = mu * mass[k];
                    c = (stiff[0][0][k] + stiff[1][1][k]) / eps;
                }
            }
            av.push(a);
            bv.push(b);
            cv.push(c);
        }
    }
    ElementBlock {
        dofs: local.iter().map(|l| l.dof()).collect(),
        a: av,
        b: bv,
        c: cv,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fespace::{build_space, ConstantField, EDofs};
    use crate::mesh::{generate, tag, DomainSpec, Mesh};
    use crate::sparse::Envelope;

    fn space(kind: DomainKind, n: usize, r: usize) -> Arc<FeSpace> {
        Arc::new(build_space(generate(&DomainSpec::new(kind, n)).unwrap(), r).unwrap())
    }

    #[test]
    fn unit_triangle_mass_block() {
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                ([0, 1], tag::BOTTOM),
                ([1, 2], tag::RIGHT),
                ([2, 0], tag::LEFT),
            ],
            vec![1],
            vec![],
        );
        let s = Arc::new(build_space(mesh, 1).unwrap());
        let fm = assemble(s.clone(), &MaterialCoefficients::vacuum()).unwrap();
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let want = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                let got = fm.b.get(s.h_dofs()[i], s.h_dofs()[j]);
                assert!((got - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matrices_are_exactly_symmetric() {
        for kind in [
            DomainKind::Square,
            DomainKind::Lshape,
            DomainKind::Slit,
            DomainKind::Square4,
        ] {
            let s = space(kind, 2, 3);
            let fm = assemble(s, &MaterialCoefficients::for_domain(kind)).unwrap();
            assert_eq!(fm.a.asymmetry(), 0.0);
            assert_eq!(fm.b.asymmetry(), 0.0);
            assert_eq!(fm.c.asymmetry(), 0.0);
        }
    }

    #[test]
    fn b_positive_definite_c_semidefinite() {
        let s = space(DomainKind::Lshape, 2, 2);
        let fm = assemble(s, &MaterialCoefficients::vacuum()).unwrap();
        assert!(Envelope::cholesky(&fm.b, fm.ordering().clone()).is_ok());
        let eig = fm.c.to_dense().symmetric_eigenvalues();
        let max = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(eig.iter().all(|&v| v >= -1e-12 * max));
    }

    #[test]
    fn constant_h_field_identities() {
        let s = space(DomainKind::Lshape, 2, 2);
        let mu = 1.7;
        let fm = assemble(s.clone(), &MaterialCoefficients::uniform(0.6, mu, &[1])).unwrap();
        let u = s.interpolate(&ConstantField([0.0, 0.0, 1.0])).into_values();
        assert!(fm.c.form(&u, &u).abs() < 1e-12);
        assert!((fm.b.form(&u, &u) - mu * 0.75 * PI * PI).abs() < 1e-11);
    }

    #[test]
    fn missing_and_bad_coefficients() {
        let s = space(DomainKind::Square4, 1, 1);
        assert!(matches!(
            assemble(s.clone(), &MaterialCoefficients::vacuum()),
            Err(AssemblyError::MissingRegion(2..=4))
        ));
        let mut m = MaterialCoefficients::transmission();
        m.eps.insert(3, -1.0);
        assert!(matches!(
            assemble(s, &m),
            Err(AssemblyError::NonPositiveCoefficient {
                name: "eps",
                tag: 3,
                ..
            })
        ));
    }

    #[test]
    fn zero_shift_pencil() {
        let s = space(DomainKind::Square, 2, 2);
        let fm = assemble(s, &MaterialCoefficients::vacuum()).unwrap();
        let p = build_pencil(&fm, 0.0);
        assert_eq!(p.l.values(), fm.a.values());
        assert_eq!(p.r.values(), fm.c.values());
    }

    #[test]
    fn r_is_semidefinite_for_random_vectors() {
        let s = space(DomainKind::Square, 3, 1);
        let fm = assemble(s, &MaterialCoefficients::vacuum()).unwrap();
        let p = build_pencil(&fm, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x: Vec<f64> = (0..fm.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(p.r.form(&x, &x) >= -1e-12);
        }
    }

    #[test]
    fn r_positive_definite_below_first_eigenvalue() {
        let s = space(DomainKind::Square, 4, 1);
        let fm = assemble(s, &MaterialCoefficients::vacuum()).unwrap();
        let p = build_pencil(&fm, 0.5);
        assert!(Envelope::cholesky(&p.r, p.ordering.clone()).is_ok());
    }

    /// `x^T R x` against direct quadrature of
    /// `int eps^-1 |curl H - t eps E|^2 + mu^-1 (curl E - t mu H)^2`
    /// with the curl of `H` not integrated by parts.
    #[test]
    fn r_matches_residual_norm_by_quadrature() {
        for (kind, r) in [
            (DomainKind::Square4, 2),
            (DomainKind::Slit, 1),
            (DomainKind::Lshape, 3),
        ] {
            let s = space(kind, 2, r);
            let mat = MaterialCoefficients::for_domain(kind);
            let fm = assemble(s.clone(), &mat).unwrap();
            let t = 0.8;
            let p = build_pencil(&fm, t);
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let x: Vec<f64> = (0..fm.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = quadrature(2 * r).unwrap();
            let mut direct = 0.0;
            for tri in 0..s.mesh().n_triangles() {
                let (eps, mu) = mat.get(s.mesh().region_tags()[tri]).unwrap();
                let g = s.geometry(tri);
                for (pt, w) in q.points.iter().zip(&q.weights) {
                    let e = s.eval_local(tri, &x, pt[0], pt[1]);
                    let ch = [e.grad_h[1], -e.grad_h[0]];
                    let r1 = [ch[0] - t * eps * e.value[0], ch[1] - t * eps * e.value[1]];
                    let r2 = e.curl_e - t * mu * e.value[2];
                    direct += w * g.det * ((r1[0] * r1[0] + r1[1] * r1[1]) / eps + r2 * r2 / mu);
                }
            }
            let form = p.r.form(&x, &x);
            assert!(
                (form - direct).abs() <= 1e-10 * direct.abs(),
                "{kind}: {form} vs {direct}"
            );
        }
    }

    #[test]
    fn assembly_reproducible_across_thread_counts() {
        let s = space(DomainKind::Square4, 3, 2);
        let mat = MaterialCoefficients::transmission();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| assemble(s.clone(), &mat).unwrap());
        let b = three.install(|| assemble(s.clone(), &mat).unwrap());
        assert_eq!(a.a.values(), b.a.values());
        assert_eq!(a.b.values(), b.b.values());
        assert_eq!(a.c.values(), b.c.values());
    }

    #[test]
    fn a_couples_only_e_and_h() {
        let s = space(DomainKind::Square, 2, 2);
        let fm = assemble(s.clone(), &MaterialCoefficients::vacuum()).unwrap();
        let is_h: Vec<bool> = {
            let mut v = vec![false; s.n_dofs()];
            for &h in s.h_dofs() {
                v[h] = true;
            }
            v
        };
        for (i, j, v) in fm.a.upper_triplets() {
            if is_h[i] == is_h[j] {
                assert_eq!(v, 0.0);
            }
        }
        assert!(s.e_dofs().iter().any(|e| matches!(e, EDofs::Free(_))));
    }
}
