//! Extreme eigenpairs of a large sparse pencil `L x = tau R x`.
//!
//! Lanczos with full reorthogonalization runs on `S = F^-1 L F^-T`, where
//! `R = F F^T` is an envelope Cholesky factor. Converged Ritz pairs are
//! locked and deflated, and the cycle is restarted from the unconverged
//! candidates plus a small random component, so repeated eigenvalues are
//! found one copy at a time.
//!
//! The number of eigenvalues beyond a threshold `theta` is not left to the
//! iteration: it is the number of positive pivots of `L - theta R`
//! (Sylvester's law of inertia), and the iteration runs until exactly that
//! many eigenvalues are locked.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normalize_sign;
use crate::error::SolveError;
use crate::sparse::{diag_scale, Envelope, SymCsr};

/// Which end of the spectrum to compute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    /// Every eigenvalue `> theta` (after the side sign is applied).
    Beyond(f64),
    /// The `k` most extreme eigenvalues.
    Count(usize),
}

#[derive(Clone, Debug)]
pub struct WindowOptions {
    /// Ritz residual tolerance relative to the spectral radius of `S`.
    pub tol: f64,
    pub seed: u64,
    /// Largest Krylov basis per cycle.
    pub max_basis: usize,
    pub max_cycles: usize,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions {
            tol: 1e-11,
            seed: 0x5eed,
            max_basis: 500,
            max_cycles: 80,
        }
    }
}

/// Eigenpairs sorted from the most extreme inward; vectors are
/// `R`-orthonormal.
#[derive(Clone, Debug)]
pub struct WindowPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Count certified by inertia (equal to `values.len()` for `Beyond`).
    pub certified: usize,
    pub cycles: usize,
    pub matvecs: usize,
}

/// Sparse pencil with a factored right-hand side.
pub struct SparsePencil<'a> {
    l: &'a SymCsr,
    r: &'a SymCsr,
    ordering: Arc<Vec<usize>>,
    factor: Envelope,
}

impl<'a> SparsePencil<'a> {
    /// Factors `R`; fails with the offending pivot when `R` is not
    /// numerically positive definite.
    pub fn new(
        l: &'a SymCsr,
        r: &'a SymCsr,
        ordering: Arc<Vec<usize>>,
    ) -> Result<Self, SolveError> {
        if l.n() != r.n() || ordering.len() != l.n() {
            return Err(SolveError::Dimension(format!(
                "L is {}, R is {}",
                l.n(),
                r.n()
            )));
        }
        let factor =
            Envelope::cholesky(r, ordering.clone()).map_err(|p| SolveError::Indefinite {
                pivot: p.index,
                value: p.value,
            })?;
        Ok(SparsePencil {
            l,
            r,
            ordering,
            factor,
        })
    }

    pub fn n(&self) -> usize {
        self.l.n()
    }

    /// Number of eigenvalues `> theta` when `sign = 1`, or `< -theta` when
    /// `sign = -1`.
    pub fn count_beyond(&self, sign: f64, theta: f64) -> usize {
        // sign * L - theta R has as many positive pivots as the wanted count
        let mut th = theta;
        for attempt in 0..6 {
            let m = SymCsr::combine(&[(sign, self.l), (-th, self.r)]);
            let scale = diag_scale(&m);
            let env = Envelope::ldlt(&m, self.ordering.clone());
            let (_, zero, pos) = env.inertia(scale * 1e-14);
            if zero == 0 {
                return pos;
            }
            // exact hit on an eigenvalue or a breakdown pivot: nudge theta
            th = theta * (1.0 + 1e-12 * f64::from(1 << attempt)) + 1e-15;
        }
        let m = SymCsr::combine(&[(sign, self.l), (-th, self.r)]);
        Envelope::ldlt(&m, self.ordering.clone()).inertia(0.0).2
    }

    fn apply(&self, sign: f64, y: &[f64], out: &mut [f64]) {
        let x = self.factor.solve_ft(y);
        let lx = self.l.mul(&x);
        let z = self.factor.solve_f(&lx);
        for (o, v) in out.iter_mut().zip(z) {
            *o = sign * v;
        }
    }

    /// Extreme eigenpairs on the side `sign` (`+1` largest, `-1` most
    /// negative). Values are returned with their true sign.
    pub fn extreme(
        &self,
        sign: f64,
        sel: Selection,
        opts: &WindowOptions,
    ) -> Result<WindowPairs, SolveError> {
        let n = self.n();
        let target = match sel {
            Selection::Beyond(theta) => Some(self.count_beyond(sign, theta)),
            Selection::Count(k) => {
                if k > n {
                    return Err(SolveError::Dimension(format!(
                        "requested {k} of {n} eigenvalues"
                    )));
                }
                None
            }
        };
        if target == Some(0) || sel == Selection::Count(0) {
            return Ok(WindowPairs {
                values: vec![],
                vectors: vec![],
                certified: 0,
                cycles: 0,
                matvecs: 0,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut locked: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut norm_est = 0.0_f64;
        let mut matvecs = 0;
        let mut start = random_unit(n, &mut rng);
        let want = target.unwrap_or(match sel {
            Selection::Count(k) => k,
            Selection::Beyond(_) => 0,
        });
        let mut basis = (2 * want + 40).max(80).min(opts.max_basis);
        let mut certified_count = None;

        for cycle in 0..opts.max_cycles {
            let room = n - locked.len();
            let m = basis.min(room);
            if m == 0 {
                break;
            }
            let locked_vecs: Vec<&[f64]> = locked.iter().map(|p| p.1.as_slice()).collect();
            orthogonalize(&mut start, &locked_vecs);
            if normalize(&mut start) == 0.0 {
                start = random_unit(n, &mut rng);
                orthogonalize(&mut start, &locked_vecs);
                normalize(&mut start);
            }
            let (v, alpha, beta) = self.lanczos(sign, &start, m, &locked_vecs, &mut matvecs);
            let k = alpha.len();
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let beta_last = beta.get(k - 1).copied().unwrap_or(0.0);
            let mut ritz: Vec<(f64, usize, f64)> = (0..k)
                .map(|i| {
                    (
                        eig.eigenvalues[i],
                        i,
                        (beta_last * eig.eigenvectors[(k - 1, i)]).abs(),
                    )
                })
                .collect();
            ritz.sort_by(|a, b| b.0.total_cmp(&a.0));
            for r in &ritz {
                norm_est = norm_est.max(r.0.abs());
            }
            for p in &locked {
                norm_est = norm_est.max(p.0.abs());
            }
            let tol = opts.tol * norm_est.max(f64::MIN_POSITIVE);
            let combine = |i: usize| -> Vec<f64> {
                let mut y = vec![0.0; n];
                for (j, vj) in v.iter().enumerate() {
                    let c = eig.eigenvectors[(j, i)];
                    for (o, x) in y.iter_mut().zip(vj) {
                        *o += c * x;
                    }
                }
                y
            };

            // lock converged Ritz pairs from the top down, stopping at the
            // first unconverged one so that no eigenvalue is skipped
            let floor = match sel {
                Selection::Beyond(theta) => Some(theta),
                Selection::Count(_) => None,
            };
            let mut pending = Vec::new();
            for &(val, i, res) in &ritz {
                if let Some(th) = floor {
                    if val <= th && pending.is_empty() {
                        // everything beyond the threshold is handled
                        break;
                    }
                }
                if res <= tol && pending.is_empty() {
                    let mut y = combine(i);
                    orthogonalize(
                        &mut y,
                        &locked.iter().map(|p| p.1.as_slice()).collect::<Vec<_>>(),
                    );
                    normalize(&mut y);
                    locked.push((val, y));
                } else {
                    pending.push(i);
                    if pending.len() >= want.saturating_sub(locked.len()).max(1) + 3 {
                        break;
                    }
                }
            }
            locked.sort_by(|a, b| b.0.total_cmp(&a.0));

            let done = match sel {
                Selection::Beyond(theta) => {
                    let beyond = locked.iter().filter(|p| p.0 > theta).count();
                    beyond >= want
                }
                Selection::Count(kk) => {
                    if locked.len() >= kk {
                        let kth = locked[kk - 1].0;
                        let margin = 1e-9 * norm_est;
                        let theta = kth - margin;
                        let found = locked.iter().filter(|p| p.0 > theta).count();
                        let inert = self.count_beyond(sign, theta);
                        if inert <= found {
                            certified_count = Some(inert);
                            true
                        } else {
                            false
                        }
                    } else {
                        false
                    }
                }
            };
            if done {
                return Ok(self.finish(
                    sign,
                    sel,
                    locked,
                    target,
                    certified_count,
                    cycle + 1,
                    matvecs,
                ));
            }

            // restart from the unconverged candidates and fresh noise
            let mut next = vec![0.0; n];
            for &i in &pending {
                let y = combine(i);
                for (o, x) in next.iter_mut().zip(&y) {
                    *o += x;
                }
            }
            let noise = random_unit(n, &mut rng);
            let scale = if pending.is_empty() { 1.0 } else { 1e-3 };
            for (o, x) in next.iter_mut().zip(&noise) {
                *o += scale * x;
            }
            start = next;
            if k < m {
                // invariant subspace: the next cycle must explore elsewhere
                start = random_unit(n, &mut rng);
            }
            basis = (basis * 3 / 2).min(opts.max_basis);
        }
        Err(SolveError::NoConvergence(format!(
            "locked {} of {} wanted eigenvalues after {} cycles",
            locked.len(),
            want,
            opts.max_cycles
        )))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        sign: f64,
        sel: Selection,
        mut locked: Vec<(f64, Vec<f64>)>,
        target: Option<usize>,
        certified: Option<usize>,
        cycles: usize,
        matvecs: usize,
    ) -> WindowPairs {
        match sel {
            Selection::Beyond(theta) => locked.retain(|p| p.0 > theta),
            Selection::Count(k) => locked.truncate(k),
        }
        let certified = target.or(certified).unwrap_or(locked.len());
        let mut values = Vec::with_capacity(locked.len());
        let mut vectors = Vec::with_capacity(locked.len());
        for (val, y) in locked {
            let mut x = self.factor.solve_ft(&y);
            normalize_sign(&mut x);
            values.push(sign * val);
            vectors.push(x);
        }
        WindowPairs {
            values,
            vectors,
            certified,
            cycles,
            matvecs,
        }
    }

    /// `m` Lanczos steps on `sign * S`, reorthogonalized against the basis
    /// and the locked vectors.
    fn lanczos(
        &self,
        sign: f64,
        start: &[f64],
        m: usize,
        locked: &[&[f64]],
        matvecs: &mut usize,
    ) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut v: Vec<Vec<f64>> = vec![start.to_vec()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut w = vec![0.0; n];
        let mut scale = 0.0_f64;
        for j in 0..m {
            self.apply(sign, &v[j], &mut w);
            *matvecs += 1;
            let a = dot(&v[j], &w);
            alpha.push(a);
            for (o, x) in w.iter_mut().zip(&v[j]) {
                *o -= a * x;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (o, x) in w.iter_mut().zip(&v[j - 1]) {
                    *o -= b * x;
                }
            }
            for _ in 0..2 {
                orthogonalize(&mut w, locked);
                let basis: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
                orthogonalize(&mut w, &basis);
            }
            let b = norm(&w);
            scale = scale.max(a.abs()).max(b);
            beta.push(b);
            if j + 1 == m || b <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                break;
            }
            v.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        v.truncate(k);
        (v, alpha, beta)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(w: &mut [f64], basis: &[&[f64]]) {
    for q in basis {
        let c = dot(q, w);
        for (o, x) in w.iter_mut().zip(q.iter()) {
            *o -= c * x;
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    v
}
