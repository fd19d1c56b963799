//! Time integration of the mild formulation.
//!
//! The evolution `u_t - k Lap u_t = Lap u + V(x,t) u^p` is integrated in its
//! mild form
//!
//! ```text
//! u(t) = G(t) u0 + int_0^t G(t - tau) B_k [ V(., tau) src(u(tau)) ] dtau,
//! ```
//!
//! where `B_k = (I - k Lap)^{-1}` and `G(t)` is the Green operator with
//! symbol `exp(-t xi^2 / (1 + k xi^2))`. The source `src` is either the raw
//! sublinear power `s -> |s|^p sign(s)` or its globally Lipschitz
//! regularization `F_m` (linear on `[0, m^{-2}]`), and runs can climb a
//! ladder of regularization levels with lifted initial data to bracket the
//! maximal solution from above.
//!
//! Every run keeps two streaming Duhamel accumulators so the stored
//! diagnostic rows carry the defect of the trajectory in the mild equation
//! and in the exponentially tilted (`mu = e^{t/k} u`) variant. Both defects
//! are reported in the original variable scale: the tilted one is multiplied
//! by `e^{-t/k}` so it stays finite on long runs.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::kernel::Multiplier;
use crate::operators::{
    forward_fft, inverse_fft, multiplier_table, weighted_norm_inner, WeightParams,
};
use crate::potentials::{radial_taper, PotentialSpec};

/// Default regularization ladder.
pub const DEFAULT_LADDER: [u32; 4] = [4, 16, 64, 256];

/// Relative slack allowed when checking that ladder levels decrease.
const LADDER_REL_TOL: f64 = 1e-6;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exponential Euler: `u+ = G(dt) u + dt G(dt) B_k[V src(u)]`. First
    /// order; kept as the reference scheme.
    EulerExp,
    /// Exponential midpoint: the source is evaluated at a half-step
    /// predictor and propagated by `G(dt/2)`. Second order.
    MidpointExp,
}

/// Policy for the smooth radial cutoff applied to the potential. Unbounded
/// potentials (and runs with growing data) must not force the far field near
/// the periodic seam, so the potential is multiplied by a taper that is one
/// on `|x| <= L/2` and vanishes beyond `3L/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// Taper whenever the potential grows in space (`sigma > 0`). Callers
    /// that evolve spatially growing data should request `Always` themselves;
    /// the solver cannot see the data's growth class.
    Auto,
    Always,
    Never,
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sublinear exponent `p in (0, 1)`.
    pub p: f64,
    /// Viscosity coefficient `k > 0` in `(I - k Lap)`.
    pub k_visc: f64,
    /// Time step.
    pub dt: f64,
    /// Slab length for the optional fixed-point sweeps; must be `>= dt`.
    pub slab_t: f64,
    /// Stop a slab's sweeps once successive iterates differ by less than
    /// this in the sup norm.
    pub picard_tol: f64,
    /// Number of fixed-point sweeps per slab (0 disables them).
    pub picard_max_iters: u32,
    /// Regularization levels `m` in increasing order; empty means a single
    /// run with the raw power and no lift.
    pub m_ladder: Vec<u32>,
    pub integrator: Integrator,
    /// Weight used for the diagnostic norm column and the ladder lift.
    pub weight: WeightParams,
    /// Abort with an overflow error when the sup norm passes this.
    pub sup_ceiling: f64,
    /// Keep every `store_stride`-th step (plus the first and last).
    pub store_stride: usize,
    pub cutoff: CutoffMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 0.5,
            k_visc: 1.0,
            dt: 1e-3,
            slab_t: 0.25,
            picard_tol: 1e-10,
            picard_max_iters: 0,
            m_ladder: DEFAULT_LADDER.to_vec(),
            integrator: Integrator::MidpointExp,
            weight: WeightParams::default(),
            sup_ceiling: 1e15,
            store_stride: 1,
            cutoff: CutoffMode::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "exponent p must lie in (0, 1), got {}",
                self.p
            )));
        }
        if !(self.k_visc > 0.0) || !self.k_visc.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "viscosity k must be positive, got {}",
                self.k_visc
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.slab_t >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "slab length {} must be at least the time step {}",
                self.slab_t, self.dt
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "picard_tol must be positive".into(),
            ));
        }
        if self.m_ladder.windows(2).any(|w| w[1] <= w[0]) || self.m_ladder.contains(&0) {
            return Err(Error::InvalidParameter(
                "m_ladder must be strictly increasing and positive".into(),
            ));
        }
        if !(self.sup_ceiling > 0.0) {
            return Err(Error::InvalidParameter(
                "sup_ceiling must be positive".into(),
            ));
        }
        if self.store_stride == 0 {
            return Err(Error::InvalidParameter(
                "store_stride must be at least 1".into(),
            ));
        }
        self.weight.validate()
    }

    fn source_for_level(&self, m: Option<u32>) -> SourceMode {
        match m {
            Some(m) => SourceMode::Regularized { m },
            None => SourceMode::Raw,
        }
    }
}

/// Reaction nonlinearity: the raw sublinear power or its Lipschitz
/// regularization `F_m` (slope `m^{2(1-p)}` on `[0, m^{-2}]`, the power
/// beyond, extended as an odd function).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    Raw,
    Regularized { m: u32 },
}

impl SourceMode {
    /// Evaluate the source at `s` for exponent `p`.
    pub fn eval(&self, s: f64, p: f64) -> f64 {
        let mag = s.abs();
        let out = match *self {
            SourceMode::Raw => mag.powf(p),
            SourceMode::Regularized { m } => {
                let m = m as f64;
                if mag <= 1.0 / (m * m) {
                    m.powf(2.0 * (1.0 - p)) * mag
                } else {
                    mag.powf(p)
                }
            }
        };
        out.copysign(s)
    }

    /// Global Lipschitz constant, when one exists.
    pub fn lipschitz(&self, p: f64) -> Option<f64> {
        match *self {
            SourceMode::Raw => None,
            SourceMode::Regularized { m } => Some((m as f64).powf(2.0 * (1.0 - p))),
        }
    }
}

/// One stored diagnostic row. All columns are measured on the inner window:
/// `sup_norm` and `weighted_norm` are sup norms there, and the residual
/// columns are the sup defects of the trajectory in the mild equation and in
/// its tilted variant (the latter scaled back by `e^{-t/k}`).
#[derive(Debug, Clone, Copy)]
pub struct DiagRow {
    pub t: f64,
    pub sup_norm: f64,
    pub weighted_norm: f64,
    pub mild_residual: f64,
    pub s_mild_residual: f64,
}

/// Stored states and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Times of the stored rows.
    pub times: Vec<f64>,
    /// Global step index of each stored row.
    pub step_indices: Vec<usize>,
    pub states: Vec<Field>,
    pub diagnostics: Vec<DiagRow>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory is never empty")
    }

    /// Index of the stored row at time `t` (within `1e-9 (1 + |t|)`).
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("time {t} is not a stored trajectory row"))
            })
    }

    /// Build a spatially constant trajectory from a scalar time series.
    /// Residual columns are set to NaN (not evaluated); use the standalone
    /// residual routines to fill them in.
    pub fn from_scalar_series(
        grid: &Arc<GridSpec>,
        times: &[f64],
        values: &[f64],
        weight: WeightParams,
    ) -> Result<Trajectory> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidParameter(
                "scalar series needs matching times/values with at least two rows".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "scalar series times must be strictly increasing".into(),
            ));
        }
        weight.validate()?;
        let mut states = Vec::with_capacity(times.len());
        let mut diagnostics = Vec::with_capacity(times.len());
        for (&t, &v) in times.iter().zip(values) {
            let f = Field::constant(grid, v);
            diagnostics.push(DiagRow {
                t,
                sup_norm: f.sup_norm_inner(),
                weighted_norm: weighted_norm_inner(&f, weight)?,
                mild_residual: f64::NAN,
                s_mild_residual: f64::NAN,
            });
            states.push(f);
        }
        Ok(Trajectory {
            times: times.to_vec(),
            step_indices: (0..times.len()).collect(),
            states,
            diagnostics,
        })
    }

    /// Delay the trajectory by `delay_rows` stored rows: row `i` of the
    /// result is row `i - delay_rows` of the original (zero before that).
    /// Requires uniformly spaced rows so the shift is a time translation.
    pub fn delayed_resample(&self, delay_rows: usize) -> Result<Trajectory> {
        if self.len() < 2 {
            return Err(Error::Precondition(
                "cannot delay a trajectory with fewer than two rows".into(),
            ));
        }
        let h = self.times[1] - self.times[0];
        if self
            .times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * (1.0 + h))
        {
            return Err(Error::Precondition(
                "delayed resampling needs uniformly spaced stored rows".into(),
            ));
        }
        if delay_rows >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "delay of {delay_rows} rows exceeds the {} stored rows",
                self.len()
            )));
        }
        let grid = self.states[0].grid();
        let mut states = Vec::with_capacity(self.len());
        let mut diagnostics = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (state, mut diag) = if i >= delay_rows {
                (
                    self.states[i - delay_rows].clone(),
                    self.diagnostics[i - delay_rows],
                )
            } else {
                let z = Field::zeros(grid);
                let row = DiagRow {
                    t: 0.0,
                    sup_norm: 0.0,
                    weighted_norm: 0.0,
                    mild_residual: f64::NAN,
                    s_mild_residual: f64::NAN,
                };
                (z, row)
            };
            diag.t = self.times[i];
            diag.mild_residual = f64::NAN;
            diag.s_mild_residual = f64::NAN;
            states.push(state);
            diagnostics.push(diag);
        }
        Ok(Trajectory {
            times: self.times.clone(),
            step_indices: self.step_indices.clone(),
            states,
            diagnostics,
        })
    }
}

/// Ladder monotonicity summary.
#[derive(Debug, Clone)]
pub struct LadderReport {
    pub levels: Vec<u32>,
    /// Worst pointwise increase between consecutive levels (0 for raw runs).
    pub max_violation: f64,
    pub tol: f64,
}

/// Result of [`solve`].
#[derive(Debug)]
pub struct SolveOutcome {
    /// Trajectory of the last ladder level (or the raw run).
    pub trajectory: Trajectory,
    pub ladder: LadderReport,
}

/// Result of [`maximal_solution`].
#[derive(Debug)]
pub struct MaximalOutcome {
    /// Richardson extrapolation (in `m^{-(1-p)}`) of the last two levels.
    pub trajectory: Trajectory,
    pub ladder: LadderReport,
    /// Sup distance between the last two levels, a measure of how far the
    /// ladder is from its limit.
    pub last_gap: f64,
}

/// Everything a run needs that does not change from step to step.
struct RunContext {
    grid: Arc<GridSpec>,
    cfg: SolverConfig,
    source: SourceMode,
    potential: PotentialSpec,
    /// Spatial factor of the potential, with the cutoff folded in.
    spatial: Vec<f64>,
    /// `(1 + k |xi|^2)^{-1}` table.
    bessel: Vec<f64>,
}

impl RunContext {
    fn new(
        grid: &Arc<GridSpec>,
        potential: &PotentialSpec,
        cfg: &SolverConfig,
        source: SourceMode,
    ) -> Result<RunContext> {
        cfg.validate()?;
        potential.validate()?;
        let taper_on = match cfg.cutoff {
            CutoffMode::Always => true,
            CutoffMode::Never => false,
            CutoffMode::Auto => potential.sigma > 0.0,
        };
        let spatial = (0..grid.len())
            .map(|i| {
                let r = grid.radius(i);
                let mut v = potential.spatial_at(r);
                if taper_on {
                    v *= radial_taper(r, grid.half_width());
                }
                v
            })
            .collect();
        let bessel = multiplier_table(grid, Multiplier::BesselVisc { k_visc: cfg.k_visc })?;
        Ok(RunContext {
            grid: grid.clone(),
            cfg: cfg.clone(),
            source,
            potential: potential.clone(),
            spatial,
            bessel,
        })
    }

    fn lambda_at(&self, t: f64) -> f64 {
        self.potential.lambda(t + self.potential.t_offset)
    }

    /// `B_k FFT(V(., t) mode(u))`.
    fn source_hat(&self, u: &Field, t: f64, mode: SourceMode) -> Vec<Complex64> {
        let lam = self.lambda_at(t);
        let p = self.cfg.p;
        let vals: Vec<f64> = u
            .values()
            .iter()
            .zip(&self.spatial)
            .map(|(&s, &v)| v * lam * mode.eval(s, p))
            .collect();
        let f = Field::from_values(&self.grid, vals).expect("same grid");
        let mut hat = forward_fft(&f);
        for (c, &b) in hat.iter_mut().zip(&self.bessel) {
            *c *= b;
        }
        hat
    }

    fn green_table(&self, t: f64) -> Result<Vec<f64>> {
        multiplier_table(
            &self.grid,
            Multiplier::Green {
                t,
                k_visc: self.cfg.k_visc,
            },
        )
    }

    /// One step of the configured integrator from `(u, t)` with step `dt`
    /// and precomputed `G(dt)` / `G(dt/2)` tables.
    fn step_once(&self, u: &Field, t: f64, dt: f64, g_dt: &[f64], g_half: &[f64]) -> Result<Field> {
        let u_hat = forward_fft(u);
        let mut next = match self.cfg.integrator {
            Integrator::EulerExp => {
                let f0 = self.source_hat(u, t, self.source);
                let spec: Vec<Complex64> = u_hat
                    .iter()
                    .zip(&f0)
                    .zip(g_dt)
                    .map(|((&uh, &fh), &g)| (uh + dt * fh) * g)
                    .collect();
                inverse_fft(&self.grid, &spec)?
            }
            Integrator::MidpointExp => {
                let f0 = self.source_hat(u, t, self.source);
                let half_spec: Vec<Complex64> = u_hat
                    .iter()
                    .zip(&f0)
                    .zip(g_half)
                    .map(|((&uh, &fh), &g)| (uh + 0.5 * dt * fh) * g)
                    .collect();
                let mut predictor = inverse_fft(&self.grid, &half_spec)?;
                predictor.clamp_non_negative();
                let f1 = self.source_hat(&predictor, t + 0.5 * dt, self.source);
                let spec: Vec<Complex64> = u_hat
                    .iter()
                    .zip(&f1)
                    .zip(g_dt.iter().zip(g_half))
                    .map(|((&uh, &fh), (&g, &gh))| uh * g + dt * gh * fh)
                    .collect();
                inverse_fft(&self.grid, &spec)?
            }
        };
        next.clamp_non_negative();
        Ok(next)
    }

    /// Integrate one uniform-step slab, optionally refining it with
    /// fixed-point sweeps of the discrete mild map (trapezoidal Duhamel).
    /// Returns the `n_steps` new states.
    fn integrate_slab(
        &self,
        start: &Field,
        t0: f64,
        n_steps: usize,
        dt: f64,
        g_dt: &[f64],
        g_half: &[f64],
    ) -> Result<Vec<Field>> {
        let mut states = Vec::with_capacity(n_steps);
        let mut current = start.clone();
        for i in 0..n_steps {
            let t = t0 + i as f64 * dt;
            current = self.step_once(&current, t, dt, g_dt, g_half)?;
            states.push(current.clone());
        }

        for _sweep in 0..self.cfg.picard_max_iters {
            // Source spectra along the previous iterate.
            let mut f_hats = Vec::with_capacity(n_steps + 1);
            f_hats.push(self.source_hat(start, t0, self.source));
            for (i, s) in states.iter().enumerate() {
                f_hats.push(self.source_hat(s, t0 + (i + 1) as f64 * dt, self.source));
            }
            let mut refined = Vec::with_capacity(n_steps);
            let mut prev = start.clone();
            let mut delta = 0.0f64;
            for i in 0..n_steps {
                let prev_hat = forward_fft(&prev);
                let spec: Vec<Complex64> = prev_hat
                    .iter()
                    .zip(f_hats[i].iter().zip(&f_hats[i + 1]))
                    .zip(g_dt)
                    .map(|((&uh, (&fa, &fb)), &g)| uh * g + 0.5 * dt * (g * fa + fb))
                    .collect();
                let mut next = inverse_fft(&self.grid, &spec)?;
                next.clamp_non_negative();
                delta = delta.max(
                    next.values()
                        .iter()
                        .zip(states[i].values())
                        .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs())),
                );
                refined.push(next.clone());
                prev = next;
            }
            states = refined;
            if delta <= self.cfg.picard_tol {
                break;
            }
        }
        Ok(states)
    }
}

/// Advance one time step. The one-shot entry point used by tests and
/// external drivers; [`run_single`] is the batched equivalent.
pub fn step(
    u: &Field,
    t: f64,
    cfg: &SolverConfig,
    potential: &PotentialSpec,
    source: SourceMode,
) -> Result<Field> {
    let ctx = RunContext::new(u.grid(), potential, cfg, source)?;
    let g_dt = ctx.green_table(cfg.dt)?;
    let g_half = ctx.green_table(0.5 * cfg.dt)?;
    ctx.step_once(u, t, cfg.dt, &g_dt, &g_half)
}

/// Streaming Duhamel accumulators and caches carried across steps.
struct DiagState {
    u0_hat: Vec<Complex64>,
    /// Trapezoidal `int G(t_n - tau) B_k[V u^p] dtau` in spectral form.
    mild_acc: Vec<Complex64>,
    /// Tilted accumulator, pre-multiplied by `e^{-t_n/k}`.
    s_acc: Vec<Complex64>,
    f_raw_prev: Vec<Complex64>,
    h_prev: Vec<Complex64>,
}

impl DiagState {
    fn new(ctx: &RunContext, u0: &Field) -> DiagState {
        let u0_hat = forward_fft(u0);
        let f_raw_prev = ctx.source_hat(u0, 0.0, SourceMode::Raw);
        let h_prev = tilted_integrand(ctx, &u0_hat, &f_raw_prev);
        let len = u0_hat.len();
        DiagState {
            u0_hat,
            mild_acc: vec![Complex64::new(0.0, 0.0); len],
            s_acc: vec![Complex64::new(0.0, 0.0); len],
            f_raw_prev,
            h_prev,
        }
    }

    /// Fold the step `t -> t + dt` into both accumulators.
    fn advance(&mut self, ctx: &RunContext, state: &Field, t_new: f64, dt: f64, g_dt: &[f64]) {
        let f_raw_new = ctx.source_hat(state, t_new, SourceMode::Raw);
        let u_hat_new = forward_fft(state);
        let h_new = tilted_integrand(ctx, &u_hat_new, &f_raw_new);
        let decay = (-dt / ctx.cfg.k_visc).exp();
        for i in 0..self.mild_acc.len() {
            self.mild_acc[i] = g_dt[i] * (self.mild_acc[i] + 0.5 * dt * self.f_raw_prev[i])
                + 0.5 * dt * f_raw_new[i];
            self.s_acc[i] =
                decay * (self.s_acc[i] + 0.5 * dt * self.h_prev[i]) + 0.5 * dt * h_new[i];
        }
        self.f_raw_prev = f_raw_new;
        self.h_prev = h_new;
    }

    /// Residual columns at time `t` for the current accumulators.
    fn residuals(&self, ctx: &RunContext, state: &Field, t: f64) -> Result<(f64, f64)> {
        let g_t = ctx.green_table(t)?;
        let mild_spec: Vec<Complex64> = self
            .u0_hat
            .iter()
            .zip(&self.mild_acc)
            .zip(&g_t)
            .map(|((&u0, &acc), &g)| u0 * g + acc)
            .collect();
        let mild_image = inverse_fft(&ctx.grid, &mild_spec)?;
        let tilt = (-t / ctx.cfg.k_visc).exp();
        let s_spec: Vec<Complex64> = self
            .u0_hat
            .iter()
            .zip(&self.s_acc)
            .map(|(&u0, &acc)| u0 * tilt + acc)
            .collect();
        let s_image = inverse_fft(&ctx.grid, &s_spec)?;
        Ok((
            sup_inner_diff(state, &mild_image),
            sup_inner_diff(state, &s_image),
        ))
    }
}

fn tilted_integrand(ctx: &RunContext, u_hat: &[Complex64], f_raw: &[Complex64]) -> Vec<Complex64> {
    let inv_k = 1.0 / ctx.cfg.k_visc;
    u_hat
        .iter()
        .zip(f_raw)
        .zip(&ctx.bessel)
        .map(|((&uh, &fh), &b)| b * inv_k * uh + fh)
        .collect()
}

fn sup_inner_diff(a: &Field, b: &Field) -> f64 {
    let g = a.grid();
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .filter(|(i, _)| g.is_inner(*i))
        .fold(0.0f64, |m, (_, (&x, &y))| m.max((x - y).abs()))
}

/// Partition of `[0, t_end]` into uniform-step slabs (one possibly shorter
/// remainder step at the end).
struct TimePlan {
    n_full: usize,
    remainder: f64,
    t_end: f64,
}

impl TimePlan {
    fn new(dt: f64, t_end: f64) -> Result<TimePlan> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_end must be positive, got {t_end}"
            )));
        }
        let ratio = t_end / dt;
        let n_full = ratio.floor() as usize;
        let mut remainder = t_end - n_full as f64 * dt;
        let n_full = if remainder <= 1e-9 * t_end.max(1.0) {
            remainder = 0.0;
            n_full
        } else if (dt - remainder).abs() <= 1e-9 * t_end.max(1.0) {
            remainder = 0.0;
            n_full + 1
        } else {
            n_full
        };
        if n_full == 0 && remainder == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} is below the time step {dt}"
            )));
        }
        Ok(TimePlan {
            n_full,
            remainder,
            t_end,
        })
    }

    fn total_steps(&self) -> usize {
        self.n_full + usize::from(self.remainder > 0.0)
    }

    fn time_of(&self, step: usize, dt: f64) -> f64 {
        if step == self.total_steps() {
            self.t_end
        } else {
            step as f64 * dt
        }
    }
}

/// Integrate a single run (one source mode, no ladder).
pub fn run_single(
    u0: &Field,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    source: SourceMode,
    t_end: f64,
) -> Result<Trajectory> {
    let ctx = RunContext::new(u0.grid(), potential, cfg, source)?;
    let plan = TimePlan::new(cfg.dt, t_end)?;
    let dt = cfg.dt;
    let g_dt = ctx.green_table(dt)?;
    let g_half = ctx.green_table(0.5 * dt)?;

    let mut diag = DiagState::new(&ctx, u0);
    let mut times = Vec::new();
    let mut step_indices = Vec::new();
    let mut states = Vec::new();
    let mut rows = Vec::new();

    let store = |times: &mut Vec<f64>,
                 step_indices: &mut Vec<usize>,
                 states: &mut Vec<Field>,
                 rows: &mut Vec<DiagRow>,
                 diag: &DiagState,
                 state: &Field,
                 step: usize,
                 t: f64|
     -> Result<()> {
        let (mild, s_mild) = diag.residuals(&ctx, state, t)?;
        rows.push(DiagRow {
            t,
            sup_norm: state.sup_norm_inner(),
            weighted_norm: weighted_norm_inner(state, cfg.weight)?,
            mild_residual: mild,
            s_mild_residual: s_mild,
        });
        times.push(t);
        step_indices.push(step);
        states.push(state.clone());
        Ok(())
    };

    store(
        &mut times,
        &mut step_indices,
        &mut states,
        &mut rows,
        &diag,
        u0,
        0,
        0.0,
    )?;

    let n_slab = ((cfg.slab_t / dt).round() as usize).max(1);
    let total = plan.total_steps();
    let mut current = u0.clone();
    let mut done = 0usize;
    while done < plan.n_full {
        let chunk = (plan.n_full - done).min(n_slab);
        let t0 = done as f64 * dt;
        let slab = ctx.integrate_slab(&current, t0, chunk, dt, &g_dt, &g_half)?;
        for (j, state) in slab.iter().enumerate() {
            let step = done + j + 1;
            let t = plan.time_of(step, dt);
            let sup = state.sup_norm();
            if !sup.is_finite() || sup > cfg.sup_ceiling {
                return Err(Error::Overflow {
                    t,
                    sup,
                    ceiling: cfg.sup_ceiling,
                });
            }
            diag.advance(&ctx, state, t, dt, &g_dt);
            if step.is_multiple_of(cfg.store_stride) || step == total {
                store(
                    &mut times,
                    &mut step_indices,
                    &mut states,
                    &mut rows,
                    &diag,
                    state,
                    step,
                    t,
                )?;
            }
        }
        current = slab.last().expect("slab is non-empty").clone();
        done += chunk;
    }
    if plan.remainder > 0.0 {
        let dt_r = plan.remainder;
        let g_dt_r = ctx.green_table(dt_r)?;
        let g_half_r = ctx.green_table(0.5 * dt_r)?;
        let t0 = plan.n_full as f64 * dt;
        let slab = ctx.integrate_slab(&current, t0, 1, dt_r, &g_dt_r, &g_half_r)?;
        let state = &slab[0];
        let sup = state.sup_norm();
        if !sup.is_finite() || sup > cfg.sup_ceiling {
            return Err(Error::Overflow {
                t: plan.t_end,
                sup,
                ceiling: cfg.sup_ceiling,
            });
        }
        diag.advance(&ctx, state, plan.t_end, dt_r, &g_dt_r);
        store(
            &mut times,
            &mut step_indices,
            &mut states,
            &mut rows,
            &diag,
            state,
            total,
            plan.t_end,
        )?;
    }

    Ok(Trajectory {
        times,
        step_indices,
        states,
        diagnostics: rows,
    })
}

/// Worst pointwise increase of `next` over `prev` across all stored rows
/// (all nodes; the ladder comparison is global on the torus).
fn ladder_violation(prev: &Trajectory, next: &Trajectory) -> Result<(f64, f64)> {
    if prev.len() != next.len() {
        return Err(Error::Precondition(
            "ladder levels stored different row counts".into(),
        ));
    }
    let mut violation = 0.0f64;
    let mut scale = 0.0f64;
    for (a, b) in prev.states.iter().zip(&next.states) {
        scale = scale.max(a.sup_norm());
        violation = a
            .values()
            .iter()
            .zip(b.values())
            .fold(violation, |m, (&pa, &pb)| m.max(pb - pa));
    }
    Ok((violation, LADDER_REL_TOL * (1.0 + scale)))
}

/// Solve with the configured regularization ladder: level `m` runs the
/// Lipschitz source `F_m` from the lifted data
/// `u0 + (1/m) (R^2 + |x|^2)^{a/2}` (weight parameters from the config).
/// Levels must decrease pointwise up to a small tolerance; the trajectory of
/// the last level is returned. An empty ladder runs the raw power once from
/// the unlifted data.
pub fn solve(
    u0: &Field,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    t_end: f64,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    if cfg.m_ladder.is_empty() {
        let trajectory = run_single(u0, potential, cfg, SourceMode::Raw, t_end)?;
        return Ok(SolveOutcome {
            trajectory,
            ladder: LadderReport {
                levels: Vec::new(),
                max_violation: 0.0,
                tol: 0.0,
            },
        });
    }
    let lift = cfg.weight.field(u0.grid());
    let mut prev: Option<Trajectory> = None;
    let mut max_violation = 0.0f64;
    let mut tol = 0.0f64;
    for &m in &cfg.m_ladder {
        let lifted = u0.zip_with(&lift, |u, w| u + w / m as f64)?;
        let traj = run_single(
            &lifted,
            potential,
            cfg,
            cfg.source_for_level(Some(m)),
            t_end,
        )?;
        if let Some(prev_traj) = &prev {
            let (violation, level_tol) = ladder_violation(prev_traj, &traj)?;
            max_violation = max_violation.max(violation);
            tol = tol.max(level_tol);
            if violation > level_tol {
                return Err(Error::NonMonotoneLadder {
                    level: m,
                    violation,
                    tol: level_tol,
                });
            }
        }
        prev = Some(traj);
    }
    Ok(SolveOutcome {
        trajectory: prev.expect("ladder is non-empty"),
        ladder: LadderReport {
            levels: cfg.m_ladder.clone(),
            max_violation,
            tol,
        },
    })
}

/// Construct the maximal solution for zero data: run the raw source from the
/// constant data `1/m` down the ladder, verify pointwise decrease, and
/// Richardson-extrapolate the last two levels in `x = m^{-(1-p)}` (the order
/// of the data's leading contribution). Extrapolated values are clamped at
/// zero; residual columns are recomputed by the standalone quadratures.
pub fn maximal_solution(
    grid: &Arc<GridSpec>,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    t_end: f64,
) -> Result<MaximalOutcome> {
    cfg.validate()?;
    if cfg.m_ladder.len() < 2 {
        return Err(Error::InvalidParameter(
            "maximal_solution needs at least two ladder levels to extrapolate".into(),
        ));
    }
    let mut prev: Option<(u32, Trajectory)> = None;
    let mut before_last: Option<(u32, Trajectory)> = None;
    let mut max_violation = 0.0f64;
    let mut tol = 0.0f64;
    for &m in &cfg.m_ladder {
        let data = Field::constant(grid, 1.0 / m as f64);
        let traj = run_single(&data, potential, cfg, SourceMode::Raw, t_end)?;
        if let Some((_, prev_traj)) = &prev {
            let (violation, level_tol) = ladder_violation(prev_traj, &traj)?;
            max_violation = max_violation.max(violation);
            tol = tol.max(level_tol);
            if violation > level_tol {
                return Err(Error::NonMonotoneLadder {
                    level: m,
                    violation,
                    tol: level_tol,
                });
            }
        }
        before_last = prev.take();
        prev = Some((m, traj));
    }
    let (m_b, traj_b) = prev.expect("ladder has >= 2 levels");
    let (m_a, traj_a) = before_last.expect("ladder has >= 2 levels");
    let x_a = (m_a as f64).powf(-(1.0 - cfg.p));
    let x_b = (m_b as f64).powf(-(1.0 - cfg.p));
    let denom = x_a - x_b;
    let mut last_gap = 0.0f64;
    let mut states = Vec::with_capacity(traj_b.len());
    for (fa, fb) in traj_a.states.iter().zip(&traj_b.states) {
        last_gap = fa
            .values()
            .iter()
            .zip(fb.values())
            .fold(last_gap, |m, (&a, &b)| m.max((a - b).abs()));
        let mut ext = fa.zip_with(fb, |ua, ub| ((x_a * ub - x_b * ua) / denom).max(0.0))?;
        if ext.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition(
                "ladder extrapolation produced a non-finite value".into(),
            ));
        }
        ext.clamp_non_negative();
        states.push(ext);
    }
    let mut trajectory = Trajectory {
        times: traj_b.times.clone(),
        step_indices: traj_b.step_indices.clone(),
        states,
        diagnostics: Vec::new(),
    };
    for i in 0..trajectory.len() {
        let state = &trajectory.states[i];
        let t = trajectory.times[i];
        trajectory.diagnostics.push(DiagRow {
            t,
            sup_norm: state.sup_norm_inner(),
            weighted_norm: weighted_norm_inner(state, cfg.weight)?,
            mild_residual: f64::NAN,
            s_mild_residual: f64::NAN,
        });
    }
    for i in 0..trajectory.len() {
        let mild = mild_residual(&trajectory, potential, cfg, i)?;
        let s_mild = s_mild_residual(&trajectory, potential, cfg, i)?;
        trajectory.diagnostics[i].mild_residual = mild;
        trajectory.diagnostics[i].s_mild_residual = s_mild;
    }
    Ok(MaximalOutcome {
        trajectory,
        ladder: LadderReport {
            levels: cfg.m_ladder.clone(),
            max_violation,
            tol,
        },
        last_gap,
    })
}

/// Sup defect of the stored trajectory in the mild equation at row
/// `t_index`, measured on the inner window. The Duhamel integral is the
/// trapezoid rule over the stored rows with the raw source.
pub fn mild_residual(
    traj: &Trajectory,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    t_index: usize,
) -> Result<f64> {
    if t_index == 0 && !traj.is_empty() {
        // The initial row satisfies the mild identity exactly; skip the
        // transform roundtrip that would report roundoff as a defect.
        return Ok(0.0);
    }
    let ctx = residual_context(traj, potential, cfg, t_index)?;
    let (ctx, tn) = ctx;
    let len = ctx.grid.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    for (j, w) in trapezoid_weights(&traj.times[..=t_index]) {
        let f_hat = ctx.source_hat(&traj.states[j], traj.times[j], SourceMode::Raw);
        let g = ctx.green_table(tn - traj.times[j])?;
        for i in 0..len {
            acc[i] += w * g[i] * f_hat[i];
        }
    }
    let u0_hat = forward_fft(&traj.states[0]);
    let g_tn = ctx.green_table(tn)?;
    for i in 0..len {
        acc[i] += g_tn[i] * u0_hat[i];
    }
    let image = inverse_fft(&ctx.grid, &acc)?;
    Ok(sup_inner_diff(&traj.states[t_index], &image))
}

/// Sup defect in the tilted (`mu = e^{t/k} u`) mild equation at row
/// `t_index`, scaled back to the original variable by `e^{-t/k}`.
pub fn s_mild_residual(
    traj: &Trajectory,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    t_index: usize,
) -> Result<f64> {
    if t_index == 0 && !traj.is_empty() {
        return Ok(0.0);
    }
    let ctx = residual_context(traj, potential, cfg, t_index)?;
    let (ctx, tn) = ctx;
    let len = ctx.grid.len();
    let inv_k = 1.0 / cfg.k_visc;
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    for (j, w) in trapezoid_weights(&traj.times[..=t_index]) {
        let u_hat = forward_fft(&traj.states[j]);
        let f_hat = ctx.source_hat(&traj.states[j], traj.times[j], SourceMode::Raw);
        let decay = (-(tn - traj.times[j]) * inv_k).exp();
        for i in 0..len {
            let h = ctx.bessel[i] * inv_k * u_hat[i] + f_hat[i];
            acc[i] += w * decay * h;
        }
    }
    let u0_hat = forward_fft(&traj.states[0]);
    let tilt = (-tn * inv_k).exp();
    for i in 0..len {
        acc[i] += tilt * u0_hat[i];
    }
    let image = inverse_fft(&ctx.grid, &acc)?;
    Ok(sup_inner_diff(&traj.states[t_index], &image))
}

fn residual_context(
    traj: &Trajectory,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    t_index: usize,
) -> Result<(RunContext, f64)> {
    if traj.is_empty() {
        return Err(Error::Precondition("empty trajectory".into()));
    }
    if t_index >= traj.len() {
        return Err(Error::InvalidParameter(format!(
            "row index {t_index} out of range (trajectory has {} rows)",
            traj.len()
        )));
    }
    let ctx = RunContext::new(traj.states[0].grid(), potential, cfg, SourceMode::Raw)?;
    Ok((ctx, traj.times[t_index]))
}

/// Trapezoid weights for the (possibly non-uniform) node set `times`.
fn trapezoid_weights(times: &[f64]) -> Vec<(usize, f64)> {
    let n = times.len();
    if n < 2 {
        return Vec::new();
    }
    (0..n)
        .map(|j| {
            let left = if j > 0 { times[j] - times[j - 1] } else { 0.0 };
            let right = if j + 1 < n {
                times[j + 1] - times[j]
            } else {
                0.0
            };
            (j, 0.5 * (left + right))
        })
        .collect()
}

/// Restart consistency: re-solve from the stored state at time `tau` with
/// the time-shifted potential and report the sup deviation (inner window)
/// from the stored tail. `tau` must be a stored row.
pub fn restart_check(
    traj: &Trajectory,
    potential: &PotentialSpec,
    cfg: &SolverConfig,
    tau: f64,
) -> Result<f64> {
    let row = traj.index_of_time(tau)?;
    if row + 1 >= traj.len() {
        return Err(Error::InvalidParameter(
            "restart time must precede the final stored row".into(),
        ));
    }
    let tail = traj.final_time() - traj.times[row];
    let source = cfg.source_for_level(cfg.m_ladder.last().copied());
    let rerun = run_single(
        &traj.states[row],
        &potential.shifted(traj.times[row]),
        cfg,
        source,
        tail,
    )?;
    // Stored rows are matched through global step indices, which are exact
    // integers; times would need a float tolerance.
    let base_step = traj.step_indices[row];
    let mut deviation = 0.0f64;
    let mut matched = 0usize;
    for (j, &step) in rerun.step_indices.iter().enumerate() {
        if let Ok(orig_row) = lookup_step(traj, base_step + step) {
            deviation = deviation.max(sup_inner_diff(&rerun.states[j], &traj.states[orig_row]));
            matched += 1;
        }
    }
    if matched < 2 {
        return Err(Error::Precondition(
            "restart produced no comparable stored rows".into(),
        ));
    }
    Ok(deviation)
}

fn lookup_step(traj: &Trajectory, step: usize) -> Result<usize> {
    traj.step_indices
        .iter()
        .position(|&s| s == step)
        .ok_or_else(|| Error::InvalidParameter(format!("step {step} is not stored")))
}

/// Largest slab length `T` such that the Picard map is a strict 1/2
/// contraction: `theta^{-1} theta_hat Lambda_sup(T) l T beta(T) <= 1/2`
/// with `beta(T) = e^{(1/theta - 1) T}`. `lambda_sup` must return the
/// supremum of the time factor over `[0, T]` (non-decreasing in `T`).
/// Returns at most `t_cap`.
pub fn contraction_slab_bound(
    theta: f64,
    theta_hat: f64,
    lipschitz: f64,
    lambda_sup: impl Fn(f64) -> f64,
    t_cap: f64,
) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    if !(theta_hat > 0.0) || !(lipschitz > 0.0) || !(t_cap > 0.0) {
        return Err(Error::InvalidParameter(
            "theta_hat, lipschitz and t_cap must be positive".into(),
        ));
    }
    let g = |t: f64| {
        let beta = ((1.0 / theta - 1.0) * t).exp();
        (1.0 / theta) * theta_hat * lambda_sup(t) * lipschitz * t * beta
    };
    let mut lo = t_cap.min(1e-9);
    if g(lo) > 0.5 {
        return Err(Error::Precondition(format!(
            "no contraction slab exists: the certificate already exceeds 1/2 at T = {lo:.3e}"
        )));
    }
    if g(t_cap) <= 0.5 {
        return Ok(t_cap);
    }
    let mut hi = t_cap;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::apply_green;

    fn grid1(n: usize, l: f64) -> Arc<GridSpec> {
        GridSpec::new(1, n, l, l / 2.0).unwrap()
    }

    fn unit_potential() -> PotentialSpec {
        PotentialSpec::default()
    }

    fn zero_potential() -> PotentialSpec {
        PotentialSpec {
            zeta: crate::potentials::SlowFactor::Constant { value: 0.0 },
            ..PotentialSpec::default()
        }
    }

    fn raw_cfg(dt: f64, integrator: Integrator) -> SolverConfig {
        SolverConfig {
            dt,
            integrator,
            m_ladder: Vec::new(),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn source_modes() {
        let raw = SourceMode::Raw;
        assert_eq!(raw.eval(0.0, 0.5), 0.0);
        assert!((raw.eval(4.0, 0.5) - 2.0).abs() < 1e-15);
        assert!((raw.eval(-4.0, 0.5) + 2.0).abs() < 1e-15);
        let reg = SourceMode::Regularized { m: 4 };
        let l = reg.lipschitz(0.5).unwrap();
        assert!((l - 4.0f64).abs() < 1e-12);
        // Continuity at the knee s = 1/m^2 and the bound F_m <= s^p.
        let knee = 1.0 / 16.0;
        assert!((reg.eval(knee, 0.5) - knee.sqrt()).abs() < 1e-14);
        for &s in &[0.0, 1e-3, knee, 0.5, 3.0] {
            assert!(reg.eval(s, 0.5) <= s.sqrt() + 1e-15);
            assert!(reg.eval(s, 0.5) >= 0.0);
            assert!((reg.eval(-s, 0.5) + reg.eval(s, 0.5)).abs() < 1e-15);
        }
        // Lipschitz property on sample pairs.
        for &(a, b) in &[(0.0, 0.01), (0.02, 0.09), (0.05, 2.0), (1.0, 3.0)] {
            assert!((reg.eval(a, 0.5) - reg.eval(b, 0.5)).abs() <= l * (a - b).abs() + 1e-15);
        }
    }

    #[test]
    fn zero_source_matches_green() {
        let grid = grid1(32, 8.0);
        let u0 = crate::operators::band_limited_field(&grid, 7, true).unwrap();
        let cfg = raw_cfg(0.05, Integrator::MidpointExp);
        let traj = run_single(&u0, &zero_potential(), &cfg, SourceMode::Raw, 0.5).unwrap();
        let exact = apply_green(&u0, 0.5, 1.0).unwrap();
        let err = sup_inner_diff(traj.final_state(), &exact);
        assert!(err < 1e-12, "V = 0 run should reproduce G(t) u0, err {err}");
        // The mild defect vanishes identically (no source, exact semigroup).
        let last = traj.diagnostics.last().unwrap();
        assert!(last.mild_residual < 1e-12);
        // The tilted defect is a trapezoid error, small but nonzero.
        assert!(last.s_mild_residual < 1e-3);
    }

    #[test]
    fn constant_run_matches_scalar_ode() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 1.0);
        let cfg = raw_cfg(1e-3, Integrator::MidpointExp);
        let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 1.0).unwrap();
        for (i, row) in traj.diagnostics.iter().enumerate() {
            let t = traj.times[i];
            let exact = (1.0 + 0.5 * t) * (1.0 + 0.5 * t);
            assert!(
                (traj.states[i].at_origin() - exact).abs() < 1e-6,
                "t = {t}: {} vs {exact}",
                traj.states[i].at_origin()
            );
            assert!(row.mild_residual < 1e-6);
        }
    }

    #[test]
    fn integrator_orders() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 1.0);
        let exact = 2.25; // (1 + t/2)^2 at t = 1
        let err = |dt: f64, integ: Integrator| {
            let cfg = raw_cfg(dt, integ);
            let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 1.0).unwrap();
            (traj.final_state().at_origin() - exact).abs()
        };
        let e1 = err(0.02, Integrator::EulerExp);
        let e2 = err(0.01, Integrator::EulerExp);
        let ratio = e1 / e2;
        assert!(
            (1.6..=2.4).contains(&ratio),
            "euler halving ratio {ratio} (errors {e1:.2e}, {e2:.2e})"
        );
        let m1 = err(0.02, Integrator::MidpointExp);
        let m2 = err(0.01, Integrator::MidpointExp);
        let mratio = m1 / m2;
        assert!(
            (3.0..=5.0).contains(&mratio),
            "midpoint halving ratio {mratio} (errors {m1:.2e}, {m2:.2e})"
        );
        assert!(
            m2 < e2 / 50.0,
            "midpoint should beat euler by a wide margin"
        );
    }

    #[test]
    fn picard_sweeps_tighten_euler() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 1.0);
        let exact = 2.25;
        let plain = raw_cfg(0.01, Integrator::EulerExp);
        let refined = SolverConfig {
            picard_max_iters: 4,
            picard_tol: 1e-13,
            slab_t: 0.1,
            ..plain.clone()
        };
        let e_plain = {
            let t = run_single(&u0, &unit_potential(), &plain, SourceMode::Raw, 1.0).unwrap();
            (t.final_state().at_origin() - exact).abs()
        };
        let e_ref = {
            let t = run_single(&u0, &unit_potential(), &refined, SourceMode::Raw, 1.0).unwrap();
            (t.final_state().at_origin() - exact).abs()
        };
        assert!(
            e_ref < e_plain / 3.0,
            "sweeps should tighten euler: {e_plain:.2e} -> {e_ref:.2e}"
        );
    }

    #[test]
    fn non_negative_and_zero_data() {
        let grid = grid1(64, 16.0);
        let bump = Field::from_radial(&grid, |r| 0.5 * (-(r / 2.0) * (r / 2.0)).exp());
        let cfg = raw_cfg(5e-3, Integrator::MidpointExp);
        let traj = run_single(&bump, &unit_potential(), &cfg, SourceMode::Raw, 1.0).unwrap();
        for s in &traj.states {
            assert!(s.values().iter().all(|&v| v >= 0.0));
        }
        // Raw evolution from zero stays zero (0^p = 0).
        let zero = Field::zeros(&grid);
        let traj0 = run_single(&zero, &unit_potential(), &cfg, SourceMode::Raw, 0.5).unwrap();
        assert_eq!(traj0.final_state().sup_norm(), 0.0);
    }

    #[test]
    fn ladder_solve_is_monotone_and_brackets() {
        let grid = grid1(16, 8.0);
        let zero = Field::zeros(&grid);
        let cfg = SolverConfig {
            dt: 2e-3,
            m_ladder: vec![4, 16],
            store_stride: 50,
            ..SolverConfig::default()
        };
        let out = solve(&zero, &unit_potential(), &cfg, 1.0).unwrap();
        assert!(out.ladder.max_violation <= out.ladder.tol);
        let v = out.trajectory.final_state().at_origin();
        // Level m = 16 from data 1/16: between the zero-data ODE value and
        // the lifted one.
        let low = 0.25;
        let high = (0.25f64.sqrt() + 0.5).powi(2) + 0.05;
        assert!(
            v > low && v < high,
            "final value {v} outside ({low}, {high})"
        );
    }

    #[test]
    fn maximal_extrapolation_hits_zero_data_ode() {
        let grid = grid1(16, 8.0);
        let cfg = SolverConfig {
            dt: 2e-3,
            store_stride: 25,
            ..SolverConfig::default()
        };
        let out = maximal_solution(&grid, &unit_potential(), &cfg, 1.0).unwrap();
        let idx = out.trajectory.index_of_time(1.0).unwrap();
        let v = out.trajectory.states[idx].at_origin();
        // Richardson over m = 64, 256 leaves an O(x_a x_b) = 1/128 defect.
        assert!(
            (v - 0.25).abs() < 0.012,
            "extrapolated value {v} should be near 0.25"
        );
        assert!(out.last_gap > 0.0);
        // Residual columns were recomputed. The extrapolated trajectory is
        // not an exact mild solution (the combination of two levels carries
        // an O(x_a x_b log t) defect through the nonlinearity), so the
        // defect is small but genuinely nonzero.
        let row = out.trajectory.diagnostics[idx];
        assert!(row.mild_residual.is_finite() && row.mild_residual < 5e-2);
    }

    #[test]
    fn restart_is_consistent() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 1.0);
        let cfg = SolverConfig {
            dt: 1e-2,
            m_ladder: Vec::new(),
            ..SolverConfig::default()
        };
        let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 1.0).unwrap();
        let dev = restart_check(&traj, &unit_potential(), &cfg, 0.5).unwrap();
        assert!(dev < 1e-9, "restart deviation {dev}");
        assert!(restart_check(&traj, &unit_potential(), &cfg, 0.987).is_err());
    }

    #[test]
    fn overflow_guard_fires() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 4.0);
        let cfg = SolverConfig {
            dt: 1e-2,
            sup_ceiling: 10.0,
            m_ladder: Vec::new(),
            ..SolverConfig::default()
        };
        match run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 4.0) {
            Err(Error::Overflow { t, sup, .. }) => {
                assert!(t > 2.0 && t < 3.0, "overflow time {t}");
                assert!(sup > 10.0);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn remainder_step_lands_exactly() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 1.0);
        let cfg = raw_cfg(0.02, Integrator::MidpointExp);
        let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 0.55).unwrap();
        assert_eq!(traj.final_time(), 0.55);
        let exact = (1.0 + 0.275f64).powi(2);
        assert!((traj.final_state().at_origin() - exact).abs() < 1e-4);
    }

    #[test]
    fn step_matches_run_single() {
        let grid = grid1(32, 8.0);
        let u0 = crate::operators::band_limited_field(&grid, 3, true).unwrap();
        let cfg = raw_cfg(0.05, Integrator::MidpointExp);
        let one = step(&u0, 0.0, &cfg, &unit_potential(), SourceMode::Raw).unwrap();
        let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 0.05).unwrap();
        let diff = sup_inner_diff(&one, traj.final_state());
        assert!(diff < 1e-14);
    }

    #[test]
    fn standalone_residuals_match_streaming() {
        let grid = grid1(32, 8.0);
        let u0 = crate::operators::band_limited_field(&grid, 11, true).unwrap();
        let cfg = raw_cfg(0.02, Integrator::MidpointExp);
        let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 0.4).unwrap();
        let last = traj.len() - 1;
        let mild = mild_residual(&traj, &unit_potential(), &cfg, last).unwrap();
        let s_mild = s_mild_residual(&traj, &unit_potential(), &cfg, last).unwrap();
        let row = traj.diagnostics[last];
        assert!(
            (mild - row.mild_residual).abs() < 1e-12,
            "standalone {mild} vs streaming {}",
            row.mild_residual
        );
        assert!((s_mild - row.s_mild_residual).abs() < 1e-12);
        // Row 0 defects vanish by definition.
        assert_eq!(
            mild_residual(&traj, &unit_potential(), &cfg, 0).unwrap(),
            0.0
        );
    }

    #[test]
    fn tilted_defect_controls_mild_defect() {
        let grid = grid1(16, 8.0);
        let u0 = Field::constant(&grid, 1.0);
        let cfg = raw_cfg(1e-3, Integrator::MidpointExp);
        let traj = run_single(&u0, &unit_potential(), &cfg, SourceMode::Raw, 2.0).unwrap();
        for row in &traj.diagnostics {
            assert!(
                row.mild_residual <= 5.0 * row.s_mild_residual + 1e-6,
                "t = {}: mild {} vs tilted {}",
                row.t,
                row.mild_residual,
                row.s_mild_residual
            );
        }
    }

    #[test]
    fn contraction_bound_behaves() {
        // Constant time factor: g(T) = 2 * 1 * l * T * e^T with theta = 1/2.
        let t = contraction_slab_bound(0.5, 1.0, 1.0, |_| 1.0, 8.0).unwrap();
        let g = 2.0 * t * (t.exp());
        assert!((g - 0.5).abs() < 1e-6, "bisection should land on g = 1/2");
        // A tiny Lipschitz constant pushes the bound to the cap.
        let cap = contraction_slab_bound(0.5, 1.0, 1e-9, |_| 1.0, 4.0).unwrap();
        assert_eq!(cap, 4.0);
        assert!(contraction_slab_bound(1.5, 1.0, 1.0, |_| 1.0, 4.0).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig {
            p: 1.0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            m_ladder: vec![4, 4],
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.slab_t = cfg.dt / 2.0;
        assert!(cfg.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
