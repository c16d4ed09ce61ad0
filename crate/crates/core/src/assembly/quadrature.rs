//! Quadrature on the reference triangle `{x >= 0, y >= 0, x + y <= 1}`.

use crate::error::AssemblyError;

pub const MAX_DEGREE: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral of `f` over the reference triangle.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

/// Rule with positive weights that integrates every polynomial of total
/// degree `<= degree` exactly.
///
/// Degrees 0 and 1 use the centroid. Higher degrees use the collapsed
/// (conical) product of Gauss-Legendre rules with `ceil((degree + 2) / 2)`
/// points per direction.
pub fn quadrature(degree: usize) -> Result<QuadRule, AssemblyError> {
    if degree > MAX_DEGREE {
        return Err(AssemblyError::UnsupportedQuadrature(degree));
    }
    if degree <= 1 {
        return Ok(QuadRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree,
        });
    }
    let n = degree.div_ceil(2) + 1;
    let (x, w) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u = x[i];
            points.push([u, x[j] * (1.0 - u)]);
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    Ok(QuadRule {
        points,
        weights,
        degree,
    })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for k in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let theta = std::f64::consts::PI * (4.0 * k as f64 + 3.0) / (4.0 * n as f64 + 2.0);
        let mut z = theta.cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
