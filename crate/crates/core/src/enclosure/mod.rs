//! One-sided bounds `rho = t + 1/tau` and the refinement loop that pairs
//! them into certified enclosures.
//!
//! At a shift `t`, every positive eigenvalue `tau` of the pencil
//! `(A - tB, C - 2tA + t^2 B)` gives an upper bound `t + 1/tau > t` for an
//! eigenfrequency above `t`, and every negative one gives a lower bound
//! below `t`. The bounds closest to `t` come from the largest `|tau|`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, build_pencil, FormMatrices, MaterialCoefficients, Pencil};
use crate::eigsolve::window::{Selection, SparsePencil, WindowOptions};
use crate::eigsolve::{solve, DEFAULT_DENSE_CAP, DEFAULT_ZERO_THRESHOLD};
use crate::error::{EnclosureError, Error, SolveError};
use crate::fespace::build_space;
use crate::mesh::{generate, refine_uniform, DomainSpec, Mesh};

/// Problems up to this size use the dense solver under [`Backend::Auto`].
pub const AUTO_DENSE_LIMIT: usize = 400;

/// Relative size of one shift nudge, in units of `t_low - t_up`.
pub const NUDGE_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Bounds above `t` from positive `tau`.
    Upper,
    /// Bounds below `t` from negative `tau`.
    Lower,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "+" | "upper" | "up" => Ok(Side::Upper),
            "-" | "lower" | "low" => Ok(Side::Lower),
            _ => Err(Error::Invalid(format!(
                "side must be upper or lower, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Dense for small problems, the sparse window solver otherwise.
    #[default]
    Auto,
    Dense,
    Window,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Backend::Auto),
            "dense" => Ok(Backend::Dense),
            "window" | "sparse" => Ok(Backend::Window),
            _ => Err(Error::Invalid(format!("unknown backend {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundOptions {
    pub backend: Backend,
    pub dense_cap: usize,
    pub zero_threshold: f64,
    pub window: WindowOptions,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            backend: Backend::Auto,
            dense_cap: DEFAULT_DENSE_CAP,
            zero_threshold: DEFAULT_ZERO_THRESHOLD,
            window: WindowOptions::default(),
        }
    }
}

/// One-sided bounds at a single shift.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundSet {
    pub t: f64,
    pub side: Side,
    /// Ordered outward from `t`: ascending for upper bounds, descending
    /// for lower bounds.
    pub rho: Vec<f64>,
    /// `rho[k]` bounds the `l_index[k]`-th eigenvalue on `side` of `t`.
    pub l_index: Vec<usize>,
    /// The pencil eigenvalues behind `rho`.
    pub tau: Vec<f64>,
    pub h: f64,
    pub n_dofs: usize,
    /// Pencil eigenvectors (`R`-orthonormal), one per bound.
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

impl BoundSet {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// How far out from `t` to collect bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Limit {
    Edge(f64),
    Count(usize),
}

struct Branch {
    /// `sign * tau`, descending.
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn use_dense(n: usize, opts: &BoundOptions) -> Result<bool, SolveError> {
    match opts.backend {
        Backend::Dense if n > opts.dense_cap => Err(SolveError::DimensionCap {
            dim: n,
            cap: opts.dense_cap,
        }),
        Backend::Dense => Ok(true),
        Backend::Window => Ok(false),
        Backend::Auto => Ok(n <= AUTO_DENSE_LIMIT),
    }
}

fn map_indefinite(t: f64) -> impl Fn(SolveError) -> EnclosureError {
    move |e| match e {
        SolveError::Indefinite { .. } => EnclosureError::IndefiniteRhs { t },
        other => EnclosureError::Solve(other),
    }
}

fn branch(
    p: &Pencil,
    side: Side,
    limit: Limit,
    opts: &BoundOptions,
) -> Result<Branch, EnclosureError> {
    let t = p.t;
    let sign = side.sign();
    let theta = match limit {
        Limit::Edge(edge) => 1.0 / (sign * (edge - t)),
        Limit::Count(_) => 0.0,
    };
    if use_dense(p.l.n(), opts)? {
        let spec = solve(&p.l.to_dense(), &p.r.to_dense(), opts.zero_threshold)
            .map_err(map_indefinite(t))?;
        let (vals, vecs) = match side {
            Side::Upper => (spec.tau_pos, spec.vec_pos),
            Side::Lower => (spec.tau_neg, spec.vec_neg),
        };
        if vals.is_empty() {
            return Err(EnclosureError::EmptyBranch { t });
        }
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for (v, x) in vals.into_iter().zip(vecs) {
            let s = sign * v;
            let keep = match limit {
                Limit::Edge(_) => s > theta,
                Limit::Count(k) => values.len() < k,
            };
            if !keep {
                break;
            }
            values.push(s);
            vectors.push(x.as_slice().to_vec());
        }
        return Ok(Branch { values, vectors });
    }
    let sp = SparsePencil::new(&p.l, &p.r, p.ordering.clone()).map_err(map_indefinite(t))?;
    let sel = match limit {
        Limit::Edge(_) => Selection::Beyond(theta),
        Limit::Count(k) => {
            let avail = sp.count_beyond(sign, 0.0);
            if avail == 0 {
                return Err(EnclosureError::EmptyBranch { t });
            }
            Selection::Count(k.min(avail))
        }
    };
    let pairs = sp.extreme(sign, sel, &opts.window)?;
    if pairs.values.is_empty() && sp.count_beyond(sign, 0.0) == 0 {
        return Err(EnclosureError::EmptyBranch { t });
    }
    Ok(Branch {
        values: pairs.values.iter().map(|v| sign * v).collect(),
        vectors: pairs.vectors,
    })
}

fn to_bound_set(fm: &FormMatrices, t: f64, side: Side, b: Branch) -> BoundSet {
    let sign = side.sign();
    let rho = b.values.iter().map(|s| t + sign / s).collect::<Vec<_>>();
    BoundSet {
        t,
        side,
        l_index: (1..=rho.len()).collect(),
        rho,
        tau: b.values.iter().map(|s| sign * s).collect(),
        h: fm.h_max(),
        n_dofs: fm.n(),
        vectors: b.vectors,
    }
}

/// All bounds strictly between `t` and `window_edge` on the given side.
pub fn bounds_at(
    fm: &FormMatrices,
    t: f64,
    side: Side,
    window_edge: f64,
) -> Result<BoundSet, EnclosureError> {
    bounds_at_with(fm, t, side, window_edge, &BoundOptions::default())
}

pub fn bounds_at_with(
    fm: &FormMatrices,
    t: f64,
    side: Side,
    window_edge: f64,
    opts: &BoundOptions,
) -> Result<BoundSet, EnclosureError> {
    let gap = side.sign() * (window_edge - t);
    if !(gap > 0.0 && t.is_finite() && window_edge.is_finite()) {
        return Err(EnclosureError::InvalidWindow(format!(
            "{side} bounds at t = {t} need the window edge on that side, got {window_edge}"
        )));
    }
    let p = build_pencil(fm, t);
    let b = branch(&p, side, Limit::Edge(window_edge), opts)?;
    Ok(to_bound_set(fm, t, side, b))
}

/// The `count` bounds nearest to `t` on the given side, regardless of any
/// window edge. Fewer are returned if the branch is shorter.
pub fn nearest_bounds(
    fm: &FormMatrices,
    t: f64,
    side: Side,
    count: usize,
    opts: &BoundOptions,
) -> Result<BoundSet, EnclosureError> {
    let p = build_pencil(fm, t);
    let b = branch(&p, side, Limit::Count(count), opts)?;
    Ok(to_bound_set(fm, t, side, b))
}

/// Number of lower bounds at `t` that are positive. Every lower bound of a
/// nonpositive eigenvalue is itself nonpositive, so on a resolving mesh
/// this is the number of eigenfrequencies in `(0, t)`.
pub fn positive_lower_count(
    fm: &FormMatrices,
    t: f64,
    opts: &BoundOptions,
) -> Result<usize, EnclosureError> {
    // rho > kappa <=> tau < -1/(t - kappa); kappa keeps the near-kernel
    // cluster at tau = -1/t out of the count
    let kappa = 1e-6 * t;
    let theta = 1.0 / (t - kappa);
    let p = build_pencil(fm, t);
    if use_dense(p.l.n(), opts)? {
        let spec = solve(&p.l.to_dense(), &p.r.to_dense(), opts.zero_threshold)
            .map_err(map_indefinite(t))?;
        return Ok(spec.tau_neg.iter().filter(|&&v| -v > theta).count());
    }
    let sp = SparsePencil::new(&p.l, &p.r, p.ordering.clone()).map_err(map_indefinite(t))?;
    Ok(sp.count_beyond(-1.0, theta))
}

/// Which bound a sweep tracks at every shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    /// The `l`-th bound outward from `t`.
    Adjacent(usize),
    /// The bound for the `j`-th positive eigenfrequency counted from the
    /// bottom, located by the number of positive lower bounds at `t`.
    Eigenvalue(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    /// `None` when the shift was unusable or the branch too short.
    pub rho: Option<f64>,
    /// Index outward from `t` that was reported.
    pub l: Option<usize>,
    pub note: Option<String>,
}

/// Bound for a fixed target at each shift of a grid, on one trial space.
pub fn sweep_t(
    fm: &FormMatrices,
    target: SweepTarget,
    side: Side,
    t_grid: &[f64],
    opts: &BoundOptions,
) -> Vec<SweepRow> {
    t_grid
        .iter()
        .map(|&t| match sweep_one(fm, target, side, t, opts) {
            Ok((l, rho)) => SweepRow {
                t,
                rho,
                l,
                note: None,
            },
            Err(e) => SweepRow {
                t,
                rho: None,
                l: None,
                note: Some(e.to_string()),
            },
        })
        .collect()
}

fn sweep_one(
    fm: &FormMatrices,
    target: SweepTarget,
    side: Side,
    t: f64,
    opts: &BoundOptions,
) -> Result<(Option<usize>, Option<f64>), EnclosureError> {
    let l = match target {
        SweepTarget::Adjacent(l) => l,
        SweepTarget::Eigenvalue(j) => {
            let below = positive_lower_count(fm, t, opts)?;
            match side {
                Side::Lower if j <= below => below - j + 1,
                Side::Upper if j > below => j - below,
                _ => return Ok((None, None)),
            }
        }
    };
    if l == 0 {
        return Ok((None, None));
    }
    let b = nearest_bounds(fm, t, side, l, opts)?;
    Ok((Some(l), b.rho.get(l - 1).copied()))
}

/// Certified interval for one eigenfrequency in the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    /// 1-based index inside the window, from the bottom.
    pub j: usize,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub t_up: f64,
    pub t_low: f64,
    pub converged: bool,
    /// Overlaps a neighbouring enclosure.
    pub cluster: bool,
}

impl Enclosure {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub level: usize,
    pub h: f64,
    pub n_dofs: usize,
    pub t_up: f64,
    pub t_low: f64,
    pub m_up: usize,
    pub m_low: usize,
    /// Upper bounds at `t_up`, ascending.
    pub upper: Vec<f64>,
    /// Lower bounds at `t_low`, re-indexed ascending.
    pub lower: Vec<f64>,
    /// Pair widths when the counts agree, empty otherwise.
    pub widths: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    BudgetExhausted,
}

/// A shift moved off an indefinite right-hand matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nudge {
    pub level: usize,
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnclosureReport {
    pub enclosures: Vec<Enclosure>,
    /// Predicted eigenvalue count in `(t_up, t_low)`, once the two counts
    /// agree.
    pub m_tilde: Option<usize>,
    pub iterations: Vec<IterationLog>,
    pub terminated: Termination,
    pub nudges: Vec<Nudge>,
    pub r: usize,
    pub t_up: f64,
    pub t_low: f64,
    pub delta: f64,
    pub domain: Option<DomainSpec>,
    pub materials: MaterialCoefficients,
}

impl EnclosureReport {
    pub fn converged(&self) -> bool {
        self.terminated == Termination::Converged
    }

    pub fn final_iteration(&self) -> Option<&IterationLog> {
        self.iterations.last()
    }
}

#[derive(Clone, Debug)]
pub struct ProcedureOptions {
    pub bounds: BoundOptions,
    /// Attempts to move a shift off an indefinite right-hand matrix.
    pub max_nudges: usize,
}

impl Default for ProcedureOptions {
    fn default() -> Self {
        ProcedureOptions {
            bounds: BoundOptions::default(),
            max_nudges: 3,
        }
    }
}

/// Runs the enclosure loop from the mesh described by `spec`, refining
/// uniformly at most `budget` times.
pub fn run_procedure(
    spec: &DomainSpec,
    mat: &MaterialCoefficients,
    r: usize,
    t_up: f64,
    t_low: f64,
    delta: f64,
    budget: usize,
) -> Result<EnclosureReport, Error> {
    run_procedure_with(
        spec,
        mat,
        r,
        t_up,
        t_low,
        delta,
        budget,
        &ProcedureOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run_procedure_with(
    spec: &DomainSpec,
    mat: &MaterialCoefficients,
    r: usize,
    t_up: f64,
    t_low: f64,
    delta: f64,
    budget: usize,
    opts: &ProcedureOptions,
) -> Result<EnclosureReport, Error> {
    check_window(t_up, t_low, delta, budget)?;
    let mesh = generate(spec)?;
    let mut report = run_on_mesh(mesh, mat, r, t_up, t_low, delta, budget, opts)?;
    report.domain = Some(*spec);
    Ok(report)
}

fn check_window(t_up: f64, t_low: f64, delta: f64, budget: usize) -> Result<(), EnclosureError> {
    if !(t_up.is_finite() && t_low.is_finite() && 0.0 < t_up && t_up < t_low) {
        return Err(EnclosureError::InvalidWindow(format!(
            "need 0 < t_up < t_low, got ({t_up}, {t_low})"
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(EnclosureError::InvalidWindow(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if budget == 0 {
        return Err(EnclosureError::InvalidWindow(
            "refinement budget must be at least 1".into(),
        ));
    }
    Ok(())
}

/// The enclosure loop starting from an explicit mesh.
#[allow(clippy::too_many_arguments)]
pub fn run_on_mesh(
    mesh: Mesh,
    mat: &MaterialCoefficients,
    r: usize,
    t_up: f64,
    t_low: f64,
    delta: f64,
    budget: usize,
    opts: &ProcedureOptions,
) -> Result<EnclosureReport, Error> {
    check_window(t_up, t_low, delta, budget)?;
    let mut report = EnclosureReport {
        enclosures: vec![],
        m_tilde: None,
        iterations: vec![],
        terminated: Termination::BudgetExhausted,
        nudges: vec![],
        r,
        t_up,
        t_low,
        delta,
        domain: None,
        materials: mat.clone(),
    };
    let mut mesh = Arc::new(mesh);
    let mut empty_levels = 0;
    for level in 0..=budget {
        let space = build_space(mesh.clone(), r)?;
        let fm = assemble(space, mat)?;
        let step = NUDGE_STEP * (t_low - t_up);
        let (up, low) = rayon::join(
            || nudged(&fm, t_up, step, Side::Upper, t_low, opts),
            || nudged(&fm, t_low, -step, Side::Lower, t_up, opts),
        );
        let (up, up_nudges) = up?;
        let (low, low_nudges) = low?;
        for (side, from, to) in up_nudges.into_iter().chain(low_nudges) {
            report.nudges.push(Nudge {
                level,
                side,
                from,
                to,
            });
        }
        let mut lower_asc = low.rho.clone();
        lower_asc.reverse();
        let mut log = IterationLog {
            level,
            h: fm.h_max(),
            n_dofs: fm.n(),
            t_up: up.t,
            t_low: low.t,
            m_up: up.len(),
            m_low: low.len(),
            upper: up.rho.clone(),
            lower: lower_asc.clone(),
            widths: vec![],
        };
        if up.len() == low.len() {
            let m = up.len();
            report.m_tilde = Some(m);
            let mut encl: Vec<Enclosure> = (0..m)
                .map(|k| {
                    let (lo, hi) = (lower_asc[k], up.rho[k]);
                    Enclosure {
                        j: k + 1,
                        lower: lo,
                        upper: hi,
                        width: hi - lo,
                        t_up: up.t,
                        t_low: low.t,
                        converged: lo <= hi && hi - lo < delta,
                        cluster: false,
                    }
                })
                .collect();
            flag_clusters(&mut encl);
            log.widths = encl.iter().map(|e| e.width).collect();
            report.iterations.push(log);
            let all = encl.iter().all(|e| e.converged);
            report.enclosures = encl;
            if m == 0 {
                // an empty window is only believed on two levels in a row
                empty_levels += 1;
                if empty_levels >= 2 {
                    report.terminated = Termination::Converged;
                    return Ok(report);
                }
            } else {
                empty_levels = 0;
                if all {
                    report.terminated = Termination::Converged;
                    return Ok(report);
                }
            }
        } else {
            empty_levels = 0;
            report.enclosures.clear();
            report.m_tilde = None;
            report.iterations.push(log);
        }
        if level < budget {
            mesh = Arc::new(refine_uniform(&mesh));
        }
    }
    Ok(report)
}

type Nudged = (BoundSet, Vec<(Side, f64, f64)>);

/// `bounds_at`, retrying at `t + k * step` when the right-hand matrix is
/// indefinite. An empty branch counts as an empty window.
fn nudged(
    fm: &FormMatrices,
    t: f64,
    step: f64,
    side: Side,
    edge: f64,
    opts: &ProcedureOptions,
) -> Result<Nudged, EnclosureError> {
    let mut log = vec![];
    let mut cur = t;
    for k in 0..=opts.max_nudges {
        match bounds_at_with(fm, cur, side, edge, &opts.bounds) {
            Ok(b) => return Ok((b, log)),
            Err(EnclosureError::EmptyBranch { .. }) => {
                let b = BoundSet {
                    t: cur,
                    side,
                    rho: vec![],
                    l_index: vec![],
                    tau: vec![],
                    h: fm.h_max(),
                    n_dofs: fm.n(),
                    vectors: vec![],
                };
                return Ok((b, log));
            }
            Err(EnclosureError::IndefiniteRhs { t: bad }) if k < opts.max_nudges => {
                let next = t + (k + 1) as f64 * step;
                log.push((side, bad, next));
                cur = next;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("the last attempt returns")
}

fn flag_clusters(encl: &mut [Enclosure]) {
    for k in 1..encl.len() {
        if encl[k].lower <= encl[k - 1].upper {
            encl[k].cluster = true;
            encl[k - 1].cluster = true;
        }
    }
}

/// Dense `(L, R)` at `t`, for small brute-force checks.
pub fn dense_pencil(fm: &FormMatrices, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = build_pencil(fm, t);
    (p.l.to_dense(), p.r.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainKind;

    fn square_fm(n: usize, r: usize) -> FormMatrices {
        let mesh = generate(&DomainSpec::new(DomainKind::Square, n)).unwrap();
        assemble(
            build_space(mesh, r).unwrap(),
            &MaterialCoefficients::vacuum(),
        )
        .unwrap()
    }

    #[test]
    fn square_upper_and_lower_bounds_of_first_eigenvalue() {
        let fm = square_fm(8, 3);
        let up = bounds_at(&fm, 0.5, Side::Upper, 1.2).unwrap();
        assert_eq!(up.len(), 2);
        for &rho in &up.rho {
            assert!(rho >= 1.0 && rho - 1.0 < 1e-4, "{rho}");
        }
        let low = bounds_at(&fm, 1.2, Side::Lower, 0.5).unwrap();
        assert_eq!(low.len(), 2);
        for &rho in &low.rho {
            assert!(rho <= 1.0 && 1.0 - rho < 1e-4, "{rho}");
        }
    }

    #[test]
    fn dense_and_window_backends_agree() {
        let fm = square_fm(4, 2);
        let dense = BoundOptions {
            backend: Backend::Dense,
            ..Default::default()
        };
        let window = BoundOptions {
            backend: Backend::Window,
            ..Default::default()
        };
        for (t, side, edge) in [(0.5, Side::Upper, 2.5), (2.3, Side::Lower, 0.5)] {
            let a = bounds_at_with(&fm, t, side, edge, &dense).unwrap();
            let b = bounds_at_with(&fm, t, side, edge, &window).unwrap();
            assert_eq!(a.rho.len(), b.rho.len());
            for (x, y) in a.rho.iter().zip(&b.rho) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn shift_above_discrete_spectrum_gives_empty_branch() {
        let fm = square_fm(1, 1);
        let p = build_pencil(&fm, 1e3);
        let spec = solve(&p.l.to_dense(), &p.r.to_dense(), 1e-10).unwrap();
        assert_eq!(spec.m_pos, 0);
        assert!(matches!(
            bounds_at(&fm, 1e3, Side::Upper, 2e3),
            Err(EnclosureError::EmptyBranch { .. })
        ));
    }

    #[test]
    fn invalid_window_edges() {
        let fm = square_fm(1, 1);
        assert!(matches!(
            bounds_at(&fm, 1.0, Side::Upper, 0.5),
            Err(EnclosureError::InvalidWindow(_))
        ));
        assert!(matches!(
            bounds_at(&fm, 1.0, Side::Lower, 1.5),
            Err(EnclosureError::InvalidWindow(_))
        ));
        let spec = DomainSpec::new(DomainKind::Square, 2);
        let vac = MaterialCoefficients::vacuum();
        assert!(run_procedure(&spec, &vac, 1, 1.2, 0.5, 1e-2, 3).is_err());
        assert!(run_procedure(&spec, &vac, 1, 0.5, 1.2, 0.0, 3).is_err());
        assert!(run_procedure(&spec, &vac, 1, 0.5, 1.2, 1e-2, 0).is_err());
    }

    #[test]
    fn bounds_are_one_sided_on_the_square() {
        let exact = [1.0, 2f64.sqrt(), 2.0, 5f64.sqrt()];
        for (n, r) in [(2, 1), (4, 1), (3, 2)] {
            let fm = square_fm(n, r);
            let up = bounds_at(&fm, 0.3, Side::Upper, 2.4).unwrap();
            // upper bound k sits above the k-th eigenvalue above 0.3
            let above = [1.0, 1.0, exact[1], exact[2], exact[2], exact[3], exact[3]];
            for (rho, w) in up.rho.iter().zip(above) {
                assert!(*rho >= w, "n={n} r={r}: {rho} < {w}");
            }
            let low = bounds_at(&fm, 2.4, Side::Lower, 0.3).unwrap();
            let below = [exact[3], exact[3], exact[2], exact[2], exact[1], 1.0, 1.0];
            for (rho, w) in low.rho.iter().zip(below) {
                assert!(*rho <= w, "n={n} r={r}: {rho} > {w}");
            }
        }
    }

    #[test]
    fn nested_refinement_tightens_bounds() {
        let mesh = generate(&DomainSpec::new(DomainKind::Square, 2)).unwrap();
        let fine = refine_uniform(&mesh);
        let vac = MaterialCoefficients::vacuum();
        let a = assemble(build_space(mesh, 2).unwrap(), &vac).unwrap();
        let b = assemble(build_space(fine, 2).unwrap(), &vac).unwrap();
        let (ua, ub) = (
            bounds_at(&a, 0.5, Side::Upper, 2.2).unwrap(),
            bounds_at(&b, 0.5, Side::Upper, 2.2).unwrap(),
        );
        for (x, y) in ua.rho.iter().zip(&ub.rho) {
            assert!(*y <= x + 1e-12);
        }
        let (la, lb) = (
            bounds_at(&a, 2.2, Side::Lower, 0.5).unwrap(),
            bounds_at(&b, 2.2, Side::Lower, 0.5).unwrap(),
        );
        for (x, y) in la.rho.iter().zip(&lb.rho) {
            assert!(*y >= x - 1e-12);
        }
        assert!(ub.len() >= ua.len() && lb.len() >= la.len());
    }

    #[test]
    fn square_procedure_certifies_the_double_eigenvalue() {
        let spec = DomainSpec::new(DomainKind::Square, 2);
        let rep =
            run_procedure(&spec, &MaterialCoefficients::vacuum(), 1, 0.5, 1.2, 1e-2, 6).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.m_tilde, Some(2));
        for e in &rep.enclosures {
            assert!(e.contains(1.0), "{e:?}");
            assert!(e.width < 1e-2 && e.width > 0.0);
        }
        let last = rep.final_iteration().unwrap();
        assert_eq!((last.m_up, last.m_low), (2, 2));
        assert!(rep.enclosures[0].cluster);
    }

    #[test]
    fn loose_tolerance_stops_on_the_first_level() {
        let spec = DomainSpec::new(DomainKind::Square, 4);
        let rep =
            run_procedure(&spec, &MaterialCoefficients::vacuum(), 2, 0.5, 1.2, 0.5, 3).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.iterations.len(), 1);
    }

    #[test]
    fn empty_window_needs_two_levels() {
        let spec = DomainSpec::new(DomainKind::Square, 4);
        let rep =
            run_procedure(&spec, &MaterialCoefficients::vacuum(), 2, 1.5, 1.9, 1e-3, 4).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.m_tilde, Some(0));
        assert!(rep.enclosures.is_empty());
        assert_eq!(rep.iterations.len(), 2);
    }

    #[test]
    fn exhausted_budget_is_flagged() {
        let spec = DomainSpec::new(DomainKind::Square, 2);
        let rep = run_procedure(
            &spec,
            &MaterialCoefficients::vacuum(),
            1,
            0.5,
            1.2,
            1e-12,
            1,
        )
        .unwrap();
        assert_eq!(rep.terminated, Termination::BudgetExhausted);
        assert_eq!(rep.iterations.len(), 2);
        assert_eq!(rep.m_tilde, Some(2));
        assert!(rep
            .enclosures
            .iter()
            .all(|e| !e.converged && e.contains(1.0)));
    }

    #[test]
    fn sweep_targets_agree() {
        let fm = square_fm(4, 2);
        let opts = BoundOptions::default();
        // below 2.2 the eigenfrequencies are 1, 1, sqrt 2, 2, 2: the third
        // from the bottom is the third nearest below
        let a = sweep_t(&fm, SweepTarget::Eigenvalue(3), Side::Lower, &[2.2], &opts);
        let b = sweep_t(&fm, SweepTarget::Adjacent(3), Side::Lower, &[2.2], &opts);
        assert_eq!(a[0].l, Some(3));
        assert_eq!(a[0].rho, b[0].rho);
        assert!(a[0].rho.unwrap() <= 2f64.sqrt());
        let c = sweep_t(&fm, SweepTarget::Eigenvalue(3), Side::Upper, &[1.2], &opts);
        assert_eq!(c[0].l, Some(1));
        assert!(c[0].rho.unwrap() >= 2f64.sqrt());
    }

    #[test]
    fn side_parsing() {
        assert_eq!("+".parse::<Side>().unwrap(), Side::Upper);
        assert_eq!("Lower".parse::<Side>().unwrap(), Side::Lower);
        assert!("sideways".parse::<Side>().is_err());
    }
}
