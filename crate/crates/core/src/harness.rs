//! Experiment descriptions, persisted run diagnostics, growth-rate fits,
//! run comparison, and the delayed-branch (non-uniqueness) demonstration.
//!
//! An experiment is a TOML-serializable [`ExperimentSpec`]: grid, potential,
//! solver parameters, measurement weight, initial data, and a time horizon.
//! Runs produce a [`Trajectory`] whose diagnostic rows can be persisted as
//! CSV (`t,sup_norm,weighted_norm,mild_residual,s_mild_residual`) and fed to
//! the growth-exponent fit.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::operators::WeightParams;
use crate::potentials::{
    lambda_star_numeric, predicted_growth, CriticalExponents, GrowthRegime, PotentialSpec,
    SlowFactor,
};
use crate::solver::{
    maximal_solution, mild_residual, s_mild_residual, solve, CutoffMode, DiagRow, LadderReport,
    SolverConfig, Trajectory,
};

/// CSV header of persisted diagnostics.
pub const CSV_HEADER: &str = "t,sup_norm,weighted_norm,mild_residual,s_mild_residual";

/// Serializable grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: u32,
    pub n_points: usize,
    pub half_width: f64,
    /// Defaults to half of `half_width`.
    #[serde(default)]
    pub inner_radius: Option<f64>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<GridSpec>> {
        let inner = self.inner_radius.unwrap_or(0.5 * self.half_width);
        GridSpec::new(self.dim, self.n_points, self.half_width, inner)
    }
}

/// Initial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * exp(-(r / width)^2)`.
    Bump {
        amplitude: f64,
        width: f64,
    },
    /// `l * (1 + |x|^2)^{a/2}`.
    PowerGrowth {
        l: f64,
        a: f64,
    },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            InitialData::Zero => Ok(()),
            InitialData::Constant { value } => {
                if !(value >= 0.0) || !value.is_finite() {
                    return bad(format!("constant data must be non-negative, got {value}"));
                }
                Ok(())
            }
            InitialData::Bump { amplitude, width } => {
                if !(amplitude >= 0.0) || !amplitude.is_finite() || !(width > 0.0) {
                    return bad(format!(
                        "bump needs amplitude >= 0 and width > 0, got ({amplitude}, {width})"
                    ));
                }
                Ok(())
            }
            InitialData::PowerGrowth { l, a } => {
                if !(l >= 0.0) || !l.is_finite() || !a.is_finite() {
                    return bad(format!(
                        "power-growth data needs l >= 0 and finite a, got ({l}, {a})"
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, grid: &Arc<GridSpec>) -> Result<Field> {
        self.validate()?;
        Ok(match *self {
            InitialData::Zero => Field::zeros(grid),
            InitialData::Constant { value } => Field::constant(grid, value),
            InitialData::Bump { amplitude, width } => Field::from_radial(grid, move |r| {
                amplitude * (-(r / width) * (r / width)).exp()
            }),
            InitialData::PowerGrowth { l, a } => {
                Field::from_radial(grid, move |r| l * (1.0 + r * r).powf(a / 2.0))
            }
        })
    }

    /// Growth exponent of the data (`a` for the power family, zero for
    /// bounded data).
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            InitialData::PowerGrowth { a, .. } => a,
            _ => 0.0,
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub weight: WeightParams,
    pub initial: InitialData,
    pub t_end: f64,
    /// Fit window `[lo, hi]` for the growth-exponent regression; defaults to
    /// `[t_end / 10, t_end]`.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.potential.validate()?;
        self.solver.validate()?;
        self.weight.validate()?;
        self.initial.validate()?;
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if let Some([lo, hi]) = self.fit_window {
            if !(lo > 0.0 && lo < hi && hi <= self.t_end * (1.0 + 1e-9)) {
                return Err(Error::InvalidParameter(format!(
                    "fit window [{lo}, {hi}] must satisfy 0 < lo < hi <= t_end = {}",
                    self.t_end
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad experiment TOML: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_file(path: &Path) -> Result<ExperimentSpec> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Solver config actually used for runs: the measurement weight is
    /// injected, and growing initial data upgrades an `Auto` cutoff to
    /// `Always` (the solver cannot see the data's growth class).
    pub fn effective_config(&self) -> SolverConfig {
        let mut cfg = self.solver.clone();
        cfg.weight = self.weight;
        if cfg.cutoff == CutoffMode::Auto && self.initial.growth_exponent() > 0.0 {
            cfg.cutoff = CutoffMode::Always;
        }
        cfg
    }

    pub fn fit_window_or_default(&self) -> [f64; 2] {
        self.fit_window.unwrap_or([self.t_end / 10.0, self.t_end])
    }
}

/// Output of [`run_experiment`].
#[derive(Debug)]
pub struct RunArtifacts {
    pub trajectory: Trajectory,
    pub ladder: LadderReport,
}

/// Run the configured ladder solve for an experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunArtifacts> {
    spec.validate()?;
    let grid = spec.grid.build()?;
    let u0 = spec.initial.build(&grid)?;
    let cfg = spec.effective_config();
    let outcome = solve(&u0, &spec.potential, &cfg, spec.t_end)?;
    Ok(RunArtifacts {
        trajectory: outcome.trajectory,
        ladder: outcome.ladder,
    })
}

/// Render diagnostic rows as CSV (deterministic: fixed 12-digit scientific
/// notation).
pub fn render_csv(rows: &[DiagRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.t, r.sup_norm, r.weighted_norm, r.mild_residual, r.s_mild_residual
        ));
    }
    out
}

/// Write diagnostics to `path`. Refuses to overwrite an existing file unless
/// `force` is set.
pub fn write_csv(path: &Path, rows: &[DiagRow], force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "output file {} already exists (use force to overwrite)",
            path.display()
        )));
    }
    fs::write(path, render_csv(rows))?;
    Ok(())
}

/// Read diagnostics back from CSV.
pub fn read_csv(path: &Path) -> Result<Vec<DiagRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "unexpected CSV header {:?} in {}",
                other,
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Config(format!(
                "line {} of {}: expected 5 columns, found {}",
                lineno + 2,
                path.display(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 2)))
        };
        rows.push(DiagRow {
            t: parse(cols[0])?,
            sup_norm: parse(cols[1])?,
            weighted_norm: parse(cols[2])?,
            mild_residual: parse(cols[3])?,
            s_mild_residual: parse(cols[4])?,
        });
    }
    Ok(rows)
}

/// Result of an ordered-pair comparison.
#[derive(Debug, Clone, Copy)]
pub struct OrderingReport {
    /// Worst pointwise excess of the smaller run over the larger one on the
    /// inner window, across all stored rows.
    pub max_violation: f64,
    pub tol: f64,
    pub holds: bool,
    pub rows: usize,
}

/// Solve two experiments that differ only in their initial data, with
/// `spec_hi`'s data dominating `spec_lo`'s pointwise, and check that the
/// ordering propagates (up to `1e-6 + 1e-3 * sup` on the inner window).
pub fn compare_runs(spec_hi: &ExperimentSpec, spec_lo: &ExperimentSpec) -> Result<OrderingReport> {
    spec_hi.validate()?;
    spec_lo.validate()?;
    if spec_hi.grid != spec_lo.grid
        || spec_hi.potential != spec_lo.potential
        || spec_hi.solver != spec_lo.solver
        || spec_hi.weight != spec_lo.weight
        || spec_hi.t_end != spec_lo.t_end
    {
        return Err(Error::Precondition(
            "comparison runs must share grid, potential, solver, weight and t_end".into(),
        ));
    }
    let grid = spec_hi.grid.build()?;
    let hi0 = spec_hi.initial.build(&grid)?;
    let lo0 = spec_lo.initial.build(&grid)?;
    compare_fields(&grid, &hi0, &lo0, spec_hi, spec_lo)
}

/// Comparison on explicit initial fields (used for seeded random pairs).
pub fn compare_fields(
    grid: &Arc<GridSpec>,
    hi0: &Field,
    lo0: &Field,
    spec_hi: &ExperimentSpec,
    spec_lo: &ExperimentSpec,
) -> Result<OrderingReport> {
    if hi0.values().iter().zip(lo0.values()).any(|(&a, &b)| a < b) {
        return Err(Error::Precondition(
            "comparison requires the first data set to dominate the second pointwise".into(),
        ));
    }
    if hi0.sup_norm() == 0.0 {
        return Err(Error::Precondition(
            "comparison requires non-trivial dominating data".into(),
        ));
    }
    // Cutoff policy must agree between the two runs.
    let mut cfg = spec_hi.effective_config();
    let cfg_lo = spec_lo.effective_config();
    if cfg_lo.cutoff == CutoffMode::Always {
        cfg.cutoff = CutoffMode::Always;
    }
    let hi = solve(hi0, &spec_hi.potential, &cfg, spec_hi.t_end)?.trajectory;
    let lo = solve(lo0, &spec_lo.potential, &cfg, spec_lo.t_end)?.trajectory;
    if hi.len() != lo.len() {
        return Err(Error::Precondition(
            "comparison runs stored different row counts".into(),
        ));
    }
    let g = grid;
    let mut violation = 0.0f64;
    let mut scale = 0.0f64;
    for (ha, lb) in hi.states.iter().zip(&lo.states) {
        scale = scale.max(ha.sup_norm_inner()).max(lb.sup_norm_inner());
        for i in 0..g.len() {
            if g.is_inner(i) {
                violation = violation.max(lb.values()[i] - ha.values()[i]);
            }
        }
    }
    let tol = 1e-6 + 1e-3 * scale;
    Ok(OrderingReport {
        max_violation: violation,
        tol,
        holds: violation <= tol,
        rows: hi.len(),
    })
}

/// Classification of a fitted run with respect to the critical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Supercritical => "supercritical",
            Regime::Critical => "critical",
            Regime::Subcritical => "subcritical",
        };
        f.write_str(s)
    }
}

/// Which diagnostic column the fit reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormColumn {
    Sup,
    Weighted,
}

/// Log-log regression summary.
#[derive(Debug, Clone, Copy)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Rate predicted by the critical-exponent dichotomy.
    pub predicted_slope: f64,
    pub regime: Regime,
    pub samples: usize,
}

/// Ordinary least squares of `ln(norm)` against `ln(t)` over the window, and
/// the predicted rate for data of growth exponent `data_exponent` against
/// the critical exponents `crit`.
pub fn fit_growth_exponent(
    rows: &[DiagRow],
    column: NormColumn,
    window: [f64; 2],
    data_exponent: f64,
    crit: CriticalExponents,
) -> Result<FitResult> {
    let [lo, hi] = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "fit window [{lo}, {hi}] must satisfy 0 < lo < hi"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in rows {
        if r.t < lo || r.t > hi {
            continue;
        }
        let v = match column {
            NormColumn::Sup => r.sup_norm,
            NormColumn::Weighted => r.weighted_norm,
        };
        if v.is_finite() && v > 0.0 {
            xs.push(r.t.ln());
            ys.push(v.ln());
        }
    }
    let n = xs.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!(
            "fit window [{lo}, {hi}] holds only {n} positive samples; need at least 10"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx < 1e-30 {
        return Err(Error::InvalidParameter(
            "fit window is degenerate (all samples at one time)".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let yhat = intercept + slope * x;
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot <= 1e-300 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    let (predicted_slope, growth) = predicted_growth(data_exponent, crit);
    let tol = 1e-9 * (1.0 + crit.a_crit.abs());
    let regime = if (data_exponent - crit.a_crit).abs() <= tol {
        Regime::Critical
    } else if growth == GrowthRegime::DataDriven {
        Regime::Supercritical
    } else {
        Regime::Subcritical
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        predicted_slope,
        regime,
        samples: n,
    })
}

/// Which construction produced the delayed family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayPath {
    /// Purely time-dependent potential: candidates are spatially constant
    /// closed forms of the tabulated primitive.
    TimeOnly,
    /// Time-independent potential: the numerical maximal solution is
    /// time-shifted.
    SpaceOnly,
    /// Space-time potential with non-decreasing time factor: the maximal
    /// solution of each shifted potential is delayed.
    SpaceTime,
}

/// One delayed candidate.
#[derive(Debug, Clone, Copy)]
pub struct NonUniquenessRow {
    pub kappa: f64,
    /// Worst mild defect over the probe rows.
    pub mild_residual: f64,
    pub s_mild_residual: f64,
    /// Inner sup norm at the final time.
    pub final_sup: f64,
}

/// Report of [`nonuniqueness_demo`].
#[derive(Debug, Clone)]
pub struct NonUniquenessReport {
    pub path: DelayPath,
    pub rows: Vec<NonUniquenessRow>,
    /// Smallest pairwise inner-sup distance between candidates at the final
    /// time; a positive value certifies the branches are distinct.
    pub min_pairwise_gap: f64,
    pub t_end: f64,
}

fn is_time_independent(potential: &PotentialSpec) -> bool {
    potential.nu == 0.0
        && potential.k_exp == 0.0
        && matches!(potential.zeta, SlowFactor::Constant { .. })
}

/// Residual probes: a quarter, half, three quarters and the end of the run.
fn probe_rows(len: usize) -> Vec<usize> {
    let last = len - 1;
    let mut rows: Vec<usize> = [last / 4, last / 2, (3 * last) / 4, last]
        .into_iter()
        .filter(|&i| i > 0)
        .collect();
    rows.dedup();
    rows
}

fn probe_residuals(
    traj: &Trajectory,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
) -> Result<(f64, f64)> {
    let mut mild = 0.0f64;
    let mut s_mild = 0.0f64;
    for i in probe_rows(traj.len()) {
        mild = mild.max(mild_residual(traj, potential, cfg, i)?);
        s_mild = s_mild.max(s_mild_residual(traj, potential, cfg, i)?);
    }
    Ok((mild, s_mild))
}

fn sup_inner_distance(a: &Field, b: &Field) -> f64 {
    let g = a.grid();
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .filter(|(i, _)| g.is_inner(*i))
        .fold(0.0f64, |m, (_, (&x, &y))| m.max((x - y).abs()))
}

/// Demonstrate non-uniqueness: build the delayed family `u_kappa` for the
/// requested ignition times and report each candidate's defect in the mild
/// equation (for the *original* potential) plus the pairwise separation at
/// the final time.
///
/// Three constructions are supported, picked from the potential's shape:
/// purely time-dependent potentials use the closed form in the tabulated
/// primitive of the time factor; time-independent ones delay the numerical
/// maximal solution; genuine space-time potentials need a non-decreasing
/// time factor (checked numerically) and delay the maximal solution of each
/// time-shifted potential. Anything else is refused.
pub fn nonuniqueness_demo(
    grid: &Arc<GridSpec>,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    kappas: &[f64],
    t_end: f64,
) -> Result<NonUniquenessReport> {
    cfg.validate()?;
    potential.validate()?;
    if potential.t_offset != 0.0 {
        return Err(Error::Precondition(
            "the delayed-family demonstration needs an unshifted potential".into(),
        ));
    }
    if kappas.is_empty() {
        return Err(Error::InvalidParameter("no ignition times given".into()));
    }
    if kappas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "ignition times must be strictly increasing".into(),
        ));
    }
    if kappas[0] < 0.0 || *kappas.last().unwrap() >= t_end {
        return Err(Error::InvalidParameter(format!(
            "ignition times must lie in [0, t_end = {t_end})"
        )));
    }

    let path = if potential.sigma == 0.0 {
        DelayPath::TimeOnly
    } else if is_time_independent(potential) {
        DelayPath::SpaceOnly
    } else {
        DelayPath::SpaceTime
    };

    let mut finals: Vec<Field> = Vec::new();
    let mut rows = Vec::new();
    match path {
        DelayPath::TimeOnly => {
            let n = (t_end / cfg.dt).round() as usize;
            if n < 2 || (n as f64 * cfg.dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "t_end = {t_end} must be a multiple of dt = {} for the closed-form family",
                    cfg.dt
                )));
            }
            let times: Vec<f64> = (0..=n).map(|i| i as f64 * cfg.dt).collect();
            let star = lambda_star_numeric(potential, &times)?;
            let q = 1.0 / (1.0 - cfg.p);
            for &kappa in kappas {
                let i_k = mesh_index(kappa, cfg.dt, "kappa")?;
                let base = star.values()[i_k];
                let values: Vec<f64> = star
                    .values()
                    .iter()
                    .map(|&s| ((1.0 - cfg.p) * (s - base)).max(0.0).powf(q))
                    .collect();
                let traj = Trajectory::from_scalar_series(grid, &times, &values, cfg.weight)?;
                let (mild, s_mild) = probe_residuals(&traj, potential, cfg)?;
                rows.push(NonUniquenessRow {
                    kappa,
                    mild_residual: mild,
                    s_mild_residual: s_mild,
                    final_sup: traj.final_state().sup_norm_inner(),
                });
                finals.push(traj.final_state().clone());
            }
        }
        DelayPath::SpaceOnly => {
            let outcome = maximal_solution(grid, potential, cfg, t_end)?;
            let base = outcome.trajectory;
            let h = row_spacing(&base)?;
            for &kappa in kappas {
                let delay = mesh_index(kappa, h, "kappa (stored-row spacing)")?;
                let traj = base.delayed_resample(delay)?;
                let (mild, s_mild) = probe_residuals(&traj, potential, cfg)?;
                rows.push(NonUniquenessRow {
                    kappa,
                    mild_residual: mild,
                    s_mild_residual: s_mild,
                    final_sup: traj.final_state().sup_norm_inner(),
                });
                finals.push(traj.final_state().clone());
            }
        }
        DelayPath::SpaceTime => {
            certify_nondecreasing_lambda(potential, t_end + kappas.last().unwrap())?;
            for &kappa in kappas {
                let traj = if kappa == 0.0 {
                    maximal_solution(grid, potential, cfg, t_end)?.trajectory
                } else {
                    let shifted =
                        maximal_solution(grid, &potential.shifted(kappa), cfg, t_end - kappa)?
                            .trajectory;
                    prepend_zero_rows(grid, &shifted, kappa, cfg)?
                };
                let (mild, s_mild) = probe_residuals(&traj, potential, cfg)?;
                rows.push(NonUniquenessRow {
                    kappa,
                    mild_residual: mild,
                    s_mild_residual: s_mild,
                    final_sup: traj.final_state().sup_norm_inner(),
                });
                finals.push(traj.final_state().clone());
            }
        }
    }

    let mut min_gap = f64::INFINITY;
    for i in 0..finals.len() {
        for j in (i + 1)..finals.len() {
            min_gap = min_gap.min(sup_inner_distance(&finals[i], &finals[j]));
        }
    }
    if !min_gap.is_finite() {
        min_gap = 0.0;
    }
    Ok(NonUniquenessReport {
        path,
        rows,
        min_pairwise_gap: min_gap,
        t_end,
    })
}

fn mesh_index(value: f64, h: f64, label: &str) -> Result<usize> {
    let idx = (value / h).round();
    if (idx * h - value).abs() > 1e-9 * (1.0 + value.abs()) || idx < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{label} = {value} must be a non-negative multiple of {h}"
        )));
    }
    Ok(idx as usize)
}

fn row_spacing(traj: &Trajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::Precondition(
            "trajectory has fewer than two rows".into(),
        ));
    }
    let h = traj.times[1] - traj.times[0];
    if traj
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * (1.0 + h))
    {
        return Err(Error::Precondition(
            "stored rows are not uniformly spaced; pick store_stride dividing the step count"
                .into(),
        ));
    }
    Ok(h)
}

/// Check `Lambda(t + tau) >= Lambda(t)` by sampling: the time factor must be
/// non-decreasing over `[0, horizon]`.
fn certify_nondecreasing_lambda(potential: &PotentialSpec, horizon: f64) -> Result<()> {
    let n = 4096;
    let mut prev = potential.lambda(0.0);
    for i in 1..=n {
        let t = horizon * i as f64 / n as f64;
        let v = potential.lambda(t);
        if v < prev - 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::Precondition(format!(
                "the time factor decreases near t = {t:.6}; the delayed construction needs \
                 a non-decreasing time factor for space-time potentials"
            )));
        }
        prev = v;
    }
    Ok(())
}

/// Glue `delay` worth of zero rows in front of a trajectory computed on
/// `[0, t_end - kappa]`, producing a candidate on the full mesh.
fn prepend_zero_rows(
    grid: &Arc<GridSpec>,
    tail: &Trajectory,
    kappa: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let h = row_spacing(tail)?;
    let lead = mesh_index(kappa, h, "kappa (stored-row spacing)")?;
    let zero = Field::zeros(grid);
    let mut times = Vec::with_capacity(lead + tail.len());
    let mut step_indices = Vec::with_capacity(lead + tail.len());
    let mut states = Vec::with_capacity(lead + tail.len());
    let mut diagnostics = Vec::with_capacity(lead + tail.len());
    for i in 0..lead {
        let t = i as f64 * h;
        times.push(t);
        step_indices.push(i);
        states.push(zero.clone());
        diagnostics.push(DiagRow {
            t,
            sup_norm: 0.0,
            weighted_norm: 0.0,
            mild_residual: f64::NAN,
            s_mild_residual: f64::NAN,
        });
    }
    for (j, &t_tail) in tail.times.iter().enumerate() {
        let t = kappa + t_tail;
        times.push(t);
        step_indices.push(lead + j);
        states.push(tail.states[j].clone());
        let mut row = tail.diagnostics[j];
        row.t = t;
        row.mild_residual = f64::NAN;
        row.s_mild_residual = f64::NAN;
        diagnostics.push(row);
    }
    let _ = cfg;
    Ok(Trajectory {
        times,
        step_indices,
        states,
        diagnostics,
    })
}
