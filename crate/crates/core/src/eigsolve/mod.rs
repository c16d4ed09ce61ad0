//! Symmetric generalized eigenproblems `L x = tau R x` with `R` positive
//! definite.
//!
//! The dense path reduces to the standard problem `F^-1 L F^-T y = tau y`
//! with the Cholesky factor `R = F F^T` and computes the full spectrum.
//! [`window`] computes only the extreme part of the spectrum for large
//! sparse pencils and certifies how many eigenvalues it must find through
//! Sylvester inertia.

pub mod window;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::SolveError;

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-10;
pub const DEFAULT_DENSE_CAP: usize = 8000;

/// Lower triangular `F` with `R = F F^T`.
#[derive(Clone, Debug)]
pub struct DenseFactor {
    pub f: DMatrix<f64>,
}

/// Cholesky factorization that reports where positivity fails.
pub fn factorize_spd(r: &DMatrix<f64>) -> Result<DenseFactor, SolveError> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(SolveError::Dimension(format!(
            "{}x{} matrix is not square",
            n,
            r.ncols()
        )));
    }
    let scale = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    // u = F^T, so that row j of F is the contiguous column j of u
    let mut u = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let d = r[(j, j)] - dot(u.column(j).as_slice(), u.column(j).as_slice(), j);
        if d.is_nan() || d <= scale * 1e-14 {
            return Err(SolveError::Indefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        u[(j, j)] = djj;
        for i in j + 1..n {
            let s = r[(i, j)] - dot(u.column(i).as_slice(), u.column(j).as_slice(), j);
            u[(j, i)] = s / djj;
        }
    }
    Ok(DenseFactor { f: u.transpose() })
}

fn dot(a: &[f64], b: &[f64], len: usize) -> f64 {
    a[..len].iter().zip(&b[..len]).map(|(x, y)| x * y).sum()
}

fn check_square(l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(), SolveError> {
    let n = l.nrows();
    if l.ncols() != n || r.nrows() != n || r.ncols() != n {
        return Err(SolveError::Dimension(format!(
            "L is {}x{}, R is {}x{}",
            l.nrows(),
            l.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

/// `S = F^-1 L F^-T`, symmetrized.
fn reduce(l: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<DMatrix<f64>, SolveError> {
    let y = f
        .solve_lower_triangular(l)
        .ok_or_else(|| SolveError::Dimension("singular factor".into()))?;
    let s = f
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| SolveError::Dimension("singular factor".into()))?;
    Ok((&s + s.transpose()) * 0.5)
}

/// All eigenvalues of `L x = tau R x`, ascending, without eigenvectors.
pub fn eigenvalues(l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Vec<f64>, SolveError> {
    check_square(l, r)?;
    let fac = factorize_spd(r)?;
    let mut v: Vec<f64> = reduce(l, &fac.f)?
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Eigenvalues of `L x = tau R x` split by sign.
#[derive(Clone, Debug, Serialize)]
pub struct SignedSpectrum {
    /// Negative eigenvalues, ascending: `tau_neg[0]` is the most negative.
    pub tau_neg: Vec<f64>,
    /// Positive eigenvalues, descending: `tau_pos[0]` is the largest.
    pub tau_pos: Vec<f64>,
    #[serde(skip)]
    pub vec_neg: Vec<DVector<f64>>,
    #[serde(skip)]
    pub vec_pos: Vec<DVector<f64>>,
    /// Eigenvalues treated as zero.
    pub zero_cluster: Vec<f64>,
    pub m_neg: usize,
    pub m_pos: usize,
}

/// Full dense solve. `zero_threshold` is relative to `max |tau|`.
pub fn solve(
    l: &DMatrix<f64>,
    r: &DMatrix<f64>,
    zero_threshold: f64,
) -> Result<SignedSpectrum, SolveError> {
    check_square(l, r)?;
    let n = l.nrows();
    let fac = factorize_spd(r)?;
    let f = &fac.f;
    let s = reduce(l, f)?;
    let eig = SymmetricEigen::new(s);
    let ft = f.transpose();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let yk = eig.eigenvectors.column(k).into_owned();
        let mut xk = ft.solve_upper_triangular(&yk).expect("nonsingular factor");
        normalize_sign(xk.as_mut_slice());
        pairs.push((eig.eigenvalues[k], xk));
    }
    let mut out = SignedSpectrum {
        tau_neg: vec![],
        tau_pos: vec![],
        vec_neg: vec![],
        vec_pos: vec![],
        zero_cluster: vec![],
        m_neg: 0,
        m_pos: 0,
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (tau, x) in pairs {
        if tau.abs() <= zero_threshold * max {
            out.zero_cluster.push(tau);
        } else if tau < 0.0 {
            out.tau_neg.push(tau);
            out.vec_neg.push(x);
        } else {
            out.tau_pos.push(tau);
            out.vec_pos.push(x);
        }
    }
    out.tau_pos.reverse();
    out.vec_pos.reverse();
    out.m_neg = out.tau_neg.len();
    out.m_pos = out.tau_pos.len();
    Ok(out)
}

/// Flips `x` so that its first entry of significant size is positive.
pub fn normalize_sign(x: &mut [f64]) {
    let max = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-10 * max) {
        if *first < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// `(n_neg, n_zero, n_pos)` by a Bunch-Kaufman symmetric indefinite
/// factorization.
pub fn inertia(m: &DMatrix<f64>) -> (usize, usize, usize) {
    let n = m.nrows();
    let mut a = m.clone();
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let scale = a.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let tol = scale * 1e-13 * (n.max(1) as f64);
    let (mut neg, mut zero, mut pos) = (0, 0, 0);
    let mut count = |d: f64| {
        if d.abs() <= tol {
            zero += 1;
        } else if d < 0.0 {
            neg += 1;
        } else {
            pos += 1;
        }
    };
    let mut k = 0;
    while k < n {
        let absakk = a[(k, k)].abs();
        let (imax, colmax) = (k + 1..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, 0.0), |b, c| if c.1 > b.1 { c } else { b });
        if absakk.max(colmax) <= tol {
            count(0.0);
            k += 1;
            continue;
        }
        let (kp, size) = if absakk >= alpha * colmax {
            (k, 1)
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| a[(imax, j)].abs())
                .fold(0.0, f64::max);
            if absakk * rowmax >= alpha * colmax * colmax {
                (k, 1)
            } else if a[(imax, imax)].abs() >= alpha * rowmax {
                (imax, 1)
            } else {
                (imax, 2)
            }
        };
        let kk = k + size - 1;
        if kp != kk {
            a.swap_rows(kp, kk);
            a.swap_columns(kp, kk);
        }
        if size == 1 {
            let d = a[(k, k)];
            count(d);
            for j in k + 1..n {
                let f = a[(j, k)] / d;
                if f != 0.0 {
                    for i in k + 1..n {
                        a[(i, j)] -= f * a[(i, k)];
                    }
                }
            }
        } else {
            let (d11, d21, d22) = (a[(k, k)], a[(k + 1, k)], a[(k + 1, k + 1)]);
            let det = d11 * d22 - d21 * d21;
            // eigenvalue signs of the 2x2 pivot
            let tr = d11 + d22;
            let disc = ((d11 - d22) * (d11 - d22) + 4.0 * d21 * d21).sqrt();
            count(0.5 * (tr + disc));
            count(0.5 * (tr - disc));
            let inv = [d22 / det, -d21 / det, d11 / det];
            for j in k + 2..n {
                let (bj0, bj1) = (a[(j, k)], a[(j, k + 1)]);
                let w0 = inv[0] * bj0 + inv[1] * bj1;
                let w1 = inv[1] * bj0 + inv[2] * bj1;
                for i in k + 2..n {
                    a[(i, j)] -= a[(i, k)] * w0 + a[(i, k + 1)] * w1;
                }
            }
        }
        k += size;
    }
    (neg, zero, pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&m + m.transpose()) * 0.5
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_factor() {
        let f = factorize_spd(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(f.f, DMatrix::identity(4, 4));
    }

    #[test]
    fn hand_cholesky() {
        let r = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 10.0]);
        let f = factorize_spd(&r).unwrap();
        assert_eq!(f.f, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 3.0]));
    }

    #[test]
    fn reconstruction_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_spd(30, &mut rng);
        let f = factorize_spd(&r).unwrap().f;
        let err = (&f * f.transpose() - &r).norm() / r.norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match factorize_spd(&r) {
            Err(SolveError::Indefinite { pivot, value }) => {
                assert_eq!(pivot, 2);
                assert!((value + 3.0).abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalar_and_diagonal_pencils() {
        let s = solve(
            &DMatrix::from_element(1, 1, 2.0),
            &DMatrix::from_element(1, 1, 4.0),
            1e-10,
        )
        .unwrap();
        assert_eq!(s.tau_pos, vec![0.5]);
        assert_eq!((s.m_pos, s.m_neg), (1, 0));
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0]));
        let s = solve(&l, &DMatrix::identity(2, 2), 1e-10).unwrap();
        assert_eq!(s.tau_pos, vec![1.0]);
        assert_eq!(s.tau_neg, vec![-3.0]);
    }

    #[test]
    fn residuals_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = random_sym(25, &mut rng);
        let r = random_spd(25, &mut rng);
        let s = solve(&l, &r, 1e-10).unwrap();
        let all: Vec<(f64, &DVector<f64>)> = s
            .tau_neg
            .iter()
            .copied()
            .zip(&s.vec_neg)
            .chain(s.tau_pos.iter().copied().zip(&s.vec_pos))
            .collect();
        assert_eq!(all.len(), 25);
        let (nl, nr) = (l.norm(), r.norm());
        for (i, (tau, x)) in all.iter().enumerate() {
            let res = (&l * *x - &r * *x * *tau).norm();
            assert!(res <= 1e-8 * (nl + tau.abs() * nr));
            for (j, (_, y)) in all.iter().enumerate() {
                let g = (x.transpose() * &r * *y)[(0, 0)];
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() <= 1e-8);
            }
        }
        assert!(s.tau_pos.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.tau_neg.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn inertia_examples() {
        assert_eq!(inertia(&DMatrix::identity(5, 5)), (0, 0, 5));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0, 2.0]));
        assert_eq!(inertia(&d), (1, 1, 1));
        // needs a 2x2 pivot
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(inertia(&z), (1, 0, 1));
    }

    #[test]
    fn inertia_matches_eigenvalue_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [3, 10, 31] {
            let m = random_sym(n, &mut rng);
            let eig = m.clone().symmetric_eigenvalues();
            let neg = eig.iter().filter(|&&v| v < 0.0).count();
            assert_eq!(inertia(&m), (neg, 0, n - neg));
        }
    }

    #[test]
    fn sign_convention() {
        let mut x = vec![0.0, -2.0, 1.0];
        normalize_sign(&mut x);
        assert_eq!(x, vec![0.0, 2.0, -1.0]);
    }

    #[test]
    fn values_only_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (l, r) = (random_sym(25, &mut rng), random_spd(25, &mut rng));
        let full = solve(&l, &r, 0.0).unwrap();
        let mut want: Vec<f64> = full.tau_neg.iter().chain(&full.tau_pos).copied().collect();
        want.sort_by(f64::total_cmp);
        let got = eigenvalues(&l, &r).unwrap();
        assert_eq!(got.len(), 25);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        assert!(eigenvalues(&l, &DMatrix::identity(3, 3)).is_err());
    }
}
