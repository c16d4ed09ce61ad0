use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, MaterialCoefficients};
use crate::eigsolve::eigenvalues;
use crate::enclosure::{
    bounds_at_with, run_procedure_with, BoundOptions, EnclosureReport, ProcedureOptions, Side,
};
use crate::error::{EnclosureError, Error, SolveError};
use crate::fespace::build_space;
use crate::mesh::{generate, refine_uniform, DomainSpec, Mesh};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub n_dofs: usize,
    /// Upper bounds at `t_up`, ascending.
    pub upper: Vec<f64>,
    /// Lower bounds at `t_low`, ascending.
    pub lower: Vec<f64>,
    /// `upper[j] - lower[j]` when both counts agree.
    pub widths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub r: usize,
    pub t_up: f64,
    pub t_low: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Fitted `d log(width) / d log(h)` per eigenvalue in the window, over
    /// the levels where that width exists. `None` with fewer than two
    /// usable levels.
    pub slopes: Vec<Option<f64>>,
}

impl ConvergenceStudy {
    /// Slope over the given levels only (indices into `rows`).
    pub fn slope_over(&self, j: usize, levels: std::ops::Range<usize>) -> Option<f64> {
        let (xs, ys) = self.series(j, levels);
        least_squares_slope(&xs, &ys)
    }

    fn series(&self, j: usize, levels: std::ops::Range<usize>) -> (Vec<f64>, Vec<f64>) {
        self.rows[levels]
            .iter()
            .filter_map(|row| {
                row.widths
                    .get(j)
                    .filter(|w| **w > 0.0)
                    .map(|w| (row.h.ln(), w.ln()))
            })
            .unzip()
    }
}

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = (0..n).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let sxx: f64 = (0..n).map(|i| (x[i] - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Bounds at fixed shifts on `levels` nested uniform refinements of the
/// mesh of `spec` and the fitted order of the enclosure widths.
pub fn convergence_study(
    spec: &DomainSpec,
    mat: &MaterialCoefficients,
    r: usize,
    levels: usize,
    t_up: f64,
    t_low: f64,
    opts: &BoundOptions,
) -> Result<ConvergenceStudy, Error> {
    if levels < 3 {
        return Err(Error::Invalid(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    if !(0.0 < t_up && t_up < t_low) {
        return Err(EnclosureError::InvalidWindow(format!(
            "need 0 < t_up < t_low, got ({t_up}, {t_low})"
        ))
        .into());
    }
    let mut mesh = generate(spec)?;
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let fm = assemble(build_space(mesh.clone(), r)?, mat)?;
        let (up, low) = rayon::join(
            || bounds_at_with(&fm, t_up, Side::Upper, t_low, opts),
            || bounds_at_with(&fm, t_low, Side::Lower, t_up, opts),
        );
        let upper = up?.rho;
        let mut lower = low?.rho;
        lower.reverse();
        let widths = if upper.len() == lower.len() {
            upper.iter().zip(&lower).map(|(u, l)| u - l).collect()
        } else {
            vec![]
        };
        rows.push(ConvergenceRow {
            level,
            h: fm.h_max(),
            n_dofs: fm.n(),
            upper,
            lower,
            widths,
        });
        if level + 1 < levels {
            mesh = refine_uniform(&mesh);
        }
    }
    let tracked = rows.iter().map(|r| r.widths.len()).max().unwrap_or(0);
    let mut study = ConvergenceStudy {
        r,
        t_up,
        t_low,
        rows,
        slopes: vec![],
    };
    study.slopes = (0..tracked)
        .map(|j| study.slope_over(j, 0..levels))
        .collect();
    Ok(study)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Inside the enclosure with this 1-based index.
    Inside(usize),
    Outside,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveValue {
    pub value: f64,
    pub placement: Placement,
    /// Outside every enclosure of a window whose enclosure run converged.
    pub spurious: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PollutionReport {
    pub window: (f64, f64),
    /// Galerkin eigenvalues of `(A, B)` in the window, on the final mesh
    /// of the enclosure run.
    pub naive: Vec<NaiveValue>,
    pub n_dofs: usize,
    /// Enclosures that contain no naive value. Overlapping enclosures may
    /// share one.
    pub missing: Vec<usize>,
    pub certified: EnclosureReport,
}

impl PollutionReport {
    pub fn spurious_count(&self) -> usize {
        self.naive.iter().filter(|v| v.spurious).count()
    }
}

/// Compares the plain Galerkin eigenvalues of `A x = w B x` inside
/// `window` with the certified enclosures of the same window.
#[allow(clippy::too_many_arguments)]
pub fn pollution_demo(
    spec: &DomainSpec,
    mat: &MaterialCoefficients,
    r: usize,
    window: (f64, f64),
    delta: f64,
    budget: usize,
    opts: &ProcedureOptions,
) -> Result<PollutionReport, Error> {
    let (a, b) = window;
    let certified = run_procedure_with(spec, mat, r, a, b, delta, budget, opts)?;
    let mut mesh: Mesh = generate(spec)?;
    for _ in 1..certified.iterations.len() {
        mesh = refine_uniform(&mesh);
    }
    let fm = assemble(build_space(Arc::new(mesh), r)?, mat)?;
    let n = fm.n();
    if n > opts.bounds.dense_cap {
        return Err(SolveError::DimensionCap {
            dim: n,
            cap: opts.bounds.dense_cap,
        }
        .into());
    }
    let values: Vec<f64> = eigenvalues(&fm.a.to_dense(), &fm.b.to_dense())?
        .into_iter()
        .filter(|w| a < *w && *w < b)
        .collect();
    let converged = certified.converged();
    let naive: Vec<NaiveValue> = values
        .into_iter()
        .map(|value| {
            let placement = certified
                .enclosures
                .iter()
                .find(|e| e.contains(value))
                .map_or(Placement::Outside, |e| Placement::Inside(e.j));
            NaiveValue {
                value,
                placement,
                spurious: converged && placement == Placement::Outside,
            }
        })
        .collect();
    let missing = certified
        .enclosures
        .iter()
        .filter(|e| !naive.iter().any(|v| e.contains(v.value)))
        .map(|e| e.j)
        .collect();
    Ok(PollutionReport {
        window,
        naive,
        n_dofs: n,
        missing,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainKind;

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = [1.0f64, 0.5, 0.25].iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = [1.0f64, 0.5, 0.25]
            .iter()
            .map(|h| (3.0 * h.powi(4)).ln())
            .collect();
        assert!((least_squares_slope(&x, &y).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(least_squares_slope(&x[..1], &y[..1]), None);
    }

    #[test]
    fn square_first_eigenvalue_order_two_for_linear_elements() {
        let spec = DomainSpec::new(DomainKind::Square, 4);
        let st = convergence_study(
            &spec,
            &MaterialCoefficients::vacuum(),
            1,
            3,
            0.5,
            1.2,
            &BoundOptions::default(),
        )
        .unwrap();
        let s = st.slopes[0].unwrap();
        assert!((s - 2.0).abs() <= 0.7, "slope {s}");
        assert!(st.rows.windows(2).all(|w| w[1].widths[0] < w[0].widths[0]));
    }

    #[test]
    fn too_few_levels() {
        let spec = DomainSpec::new(DomainKind::Square, 2);
        assert!(convergence_study(
            &spec,
            &MaterialCoefficients::vacuum(),
            1,
            2,
            0.5,
            1.2,
            &BoundOptions::default()
        )
        .is_err());
    }

    #[test]
    fn square_naive_values_fall_inside() {
        let spec = DomainSpec::new(DomainKind::Square, 4);
        let rep = pollution_demo(
            &spec,
            &MaterialCoefficients::vacuum(),
            2,
            (0.5, 1.2),
            1e-2,
            3,
            &Default::default(),
        )
        .unwrap();
        assert!(rep.certified.converged());
        assert_eq!(rep.spurious_count(), 0);
        assert_eq!(rep.naive.len(), 2);
        assert!(rep.missing.is_empty());
    }

    #[test]
    fn empty_square_window() {
        let spec = DomainSpec::new(DomainKind::Square, 4);
        let rep = pollution_demo(
            &spec,
            &MaterialCoefficients::vacuum(),
            1,
            (1.5, 1.9),
            1e-2,
            3,
            &Default::default(),
        )
        .unwrap();
        assert!(rep.certified.enclosures.is_empty());
        assert!(rep.naive.iter().all(|v| v.spurious));
    }
}
