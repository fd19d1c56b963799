//! Spectral operators, weighted norms, and operator-bound verification.
//!
//! The resolvent `B = (I - Laplacian)^{-1}` and the Green operator
//! `G(t) = e^{-t} e^{tB}` act diagonally in Fourier space; [`apply_multiplier`]
//! implements both through cached FFT plans. The weighted sup norms
//! `||u||_{R,a} = sup |u(x)| / (R^2 + |x|^2)^{a/2}` verify, numerically, the
//! contraction estimates the fixed-point scheme relies on:
//!
//! * for decaying weights (`a >= 0`), `||B phi|| <= (1/theta) ||phi||` and
//!   `||G(t) phi|| <= e^{-(1 - 1/theta) t} ||phi||` whenever
//!   `(1 - theta) R^2 >= a (n + (a - 2)_+)`;
//! * for growing weights (`a < 0`), the same contraction holds pointwise on
//!   the weight itself, `B Lambda <= (1/theta) Lambda`, under
//!   `(1 - theta) R^2 >= -a (n - (a + 2)_-)`;
//! * the two-sided comparison `eps Lambda <= B Lambda <= (1/theta) Lambda`
//!   and the Green-operator sandwich `G(t) Lambda_{rho,d} <= Lambda_{rho+kt,d}`
//!   (with a matching lower bound for small `k`) transport weights in time.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::kernel::Multiplier;
use rand::Rng;
use rand::SeedableRng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plan_cache() -> &'static Mutex<HashMap<usize, PlanPair>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plans_for(n: usize) -> PlanPair {
    let mut cache = plan_cache().lock().expect("FFT plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Forward DFT of a real field into a complex spectrum (row-major in 2-D).
pub fn forward_fft(field: &Field) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = field
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft_in_place(field.grid(), &mut data, true);
    data
}

/// Inverse DFT back to a real field (imaginary parts are discarded; they are
/// at round-off level for spectra of real fields under real multipliers).
pub fn inverse_fft(grid: &Arc<GridSpec>, spectrum: &[Complex64]) -> Result<Field> {
    let mut data = spectrum.to_vec();
    fft_in_place(grid, &mut data, false);
    let scale = 1.0 / grid.len() as f64;
    Field::from_values(grid, data.iter().map(|c| c.re * scale).collect())
}

fn fft_in_place(grid: &Arc<GridSpec>, data: &mut [Complex64], forward: bool) {
    let n = grid.n_points();
    let (fwd, inv) = plans_for(n);
    let plan = if forward { fwd } else { inv };
    match grid.dim() {
        1 => plan.process(data),
        _ => {
            // Rows, transpose, rows, transpose back.
            for row in data.chunks_exact_mut(n) {
                plan.process(row);
            }
            transpose_square(data, n);
            for row in data.chunks_exact_mut(n) {
                plan.process(row);
            }
            transpose_square(data, n);
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Tabulate a multiplier symbol on the grid's frequency lattice.
pub fn multiplier_table(grid: &Arc<GridSpec>, symbol: Multiplier) -> Result<Vec<f64>> {
    symbol.validate()?;
    Ok((0..grid.len())
        .map(|i| symbol.eval(grid.freq_sq_at(i)))
        .collect())
}

/// Apply a Fourier multiplier to a field.
pub fn apply_multiplier(field: &Field, symbol: Multiplier) -> Result<Field> {
    let table = multiplier_table(field.grid(), symbol)?;
    let mut spectrum = forward_fft(field);
    for (c, m) in spectrum.iter_mut().zip(&table) {
        *c *= *m;
    }
    inverse_fft(field.grid(), &spectrum)
}

/// `B u = (I - Laplacian)^{-1} u`.
pub fn apply_bessel(field: &Field) -> Result<Field> {
    apply_multiplier(field, Multiplier::Bessel)
}

/// `(I - k Laplacian)^{-1} u`.
pub fn apply_bessel_visc(field: &Field, k_visc: f64) -> Result<Field> {
    apply_multiplier(field, Multiplier::BesselVisc { k_visc })
}

/// Green operator `G(t) u` for the viscosity `k_visc`.
pub fn apply_green(field: &Field, t: f64, k_visc: f64) -> Result<Field> {
    apply_multiplier(field, Multiplier::Green { t, k_visc })
}

/// Parameters of the polynomial weight `(R^2 + |x|^2)^{a/2}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct WeightParams {
    /// Scale `R >= 1`.
    pub r_scale: f64,
    /// Exponent `a`; positive weights decay the norm, negative ones grow it.
    pub exponent: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        WeightParams {
            r_scale: 1.0,
            exponent: 0.0,
        }
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_scale >= 1.0) || !self.r_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight scale must satisfy R >= 1, got {}",
                self.r_scale
            )));
        }
        if !self.exponent.is_finite() {
            return Err(Error::InvalidParameter(
                "weight exponent must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Evaluate the weight at radius `r`.
    pub fn eval(&self, r: f64) -> f64 {
        (self.r_scale * self.r_scale + r * r).powf(self.exponent / 2.0)
    }

    /// The weight as a field on a grid.
    pub fn field(&self, grid: &Arc<GridSpec>) -> Field {
        let w = *self;
        Field::from_radial(grid, move |r| w.eval(r))
    }
}

/// Weighted sup norm `sup |u| / (R^2 + |x|^2)^{a/2}` over the whole torus.
pub fn weighted_norm(field: &Field, weight: WeightParams) -> Result<f64> {
    weight.validate()?;
    let g = field.grid();
    Ok(field.values().iter().enumerate().fold(0.0f64, |m, (i, v)| {
        m.max(v.abs() / weight.eval(g.radius(i)))
    }))
}

/// Weighted sup norm restricted to the inner measurement window.
pub fn weighted_norm_inner(field: &Field, weight: WeightParams) -> Result<f64> {
    weight.validate()?;
    let g = field.grid();
    Ok(field
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.is_inner(*i))
        .fold(0.0f64, |m, (i, v)| {
            m.max(v.abs() / weight.eval(g.radius(i)))
        }))
}

/// Membership in the admissible exponent set: `d (d + n - 2) >= 0`.
/// In dimension one this is `{0} union (-inf, ... ]` intersected with the
/// relevant sign ranges; we expose the exact inequality.
pub fn jn_contains(dim: u32, d: f64) -> bool {
    d * (d + dim as f64 - 2.0) >= 0.0
}

/// Membership in the non-negative part: `{0} union [1, inf)` in dimension
/// one, `[0, inf)` in dimension two and higher.
pub fn jn_plus_contains(dim: u32, d: f64) -> bool {
    if d < 0.0 {
        return false;
    }
    jn_contains(dim, d)
}

/// Deterministic band-limited random field: modes with `|j| <= N / 4` per
/// axis get unit-variance Gaussian coefficients (Hermitian-symmetrized), and
/// the result is normalized to unit sup norm. With `non_negative` the field
/// is squared first, producing a smooth non-negative test function.
pub fn band_limited_field(grid: &Arc<GridSpec>, seed: u64, non_negative: bool) -> Result<Field> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_points();
    let cutoff = n / 4;
    let keep = |j: usize| -> bool {
        let signed = if j <= n / 2 {
            j as isize
        } else {
            j as isize - n as isize
        };
        signed.unsigned_abs() <= cutoff
    };
    let mut spectrum = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, c) in spectrum.iter_mut().enumerate() {
        let in_band = match grid.dim() {
            1 => keep(i),
            _ => keep(i / n) && keep(i % n),
        };
        if in_band {
            // Box-Muller from two uniforms.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let mag = (-2.0 * u1.ln()).sqrt();
            let ang = 2.0 * std::f64::consts::PI * u2;
            *c = Complex64::new(mag * ang.cos(), mag * ang.sin());
        }
    }
    let mut field = inverse_fft(grid, &spectrum)?;
    if non_negative {
        field = field.map(|v| v * v);
    }
    let sup = field.sup_norm();
    if sup == 0.0 {
        return Err(Error::Precondition(
            "random field degenerated to zero".into(),
        ));
    }
    Ok(field.map(move |v| v / sup))
}

/// Outcome of one operator-bound trial.
#[derive(Debug, Clone)]
pub struct BoundTrial {
    pub seed: u64,
    /// `||B phi|| / ||phi||`, to be compared against `1/theta`.
    pub bessel_ratio: f64,
    /// Worst `||G(t) phi|| / (beta(t) ||phi||)` over the probe times.
    pub green_ratio: f64,
}

/// Report from [`verify_operator_bounds`].
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub theta_inv: f64,
    pub trials: Vec<BoundTrial>,
    pub worst_bessel: f64,
    pub worst_green: f64,
    /// True when every trial respects both bounds (with tolerance 1e-9 rel).
    pub holds: bool,
}

fn theta_condition_decaying(theta: f64, r_scale: f64, dim: u32, a: f64) -> bool {
    (1.0 - theta) * r_scale * r_scale >= a * (dim as f64 + (a - 2.0).max(0.0))
}

fn theta_condition_growing(theta: f64, r_scale: f64, dim: u32, a: f64) -> bool {
    // a < 0: (1 - theta) R^2 >= -a (n - (a + 2)_-).
    (1.0 - theta) * r_scale * r_scale >= -a * (dim as f64 - (a + 2.0).min(0.0))
}

/// Verify the resolvent and Green-operator contraction bounds in the weighted
/// sup norm `|| . ||_{R,a}`.
///
/// For `a >= 0` the bounds are checked on band-limited random fields
/// (`n_trials` seeds, probe times `t in {0.25, 1, 4}`). For `a < 0` the bound
/// is pointwise on the growing weight itself: `B Lambda <= (1/theta) Lambda`
/// and `G(t) Lambda <= beta(t) Lambda` on the inner window.
///
/// Fails with a precondition error when `theta` violates the smallness
/// condition for the requested weight.
pub fn verify_operator_bounds(
    grid: &Arc<GridSpec>,
    weight: WeightParams,
    theta: f64,
    n_trials: usize,
) -> Result<BoundReport> {
    weight.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let a = weight.exponent;
    let dim = grid.dim();
    let condition_ok = if a >= 0.0 {
        theta_condition_decaying(theta, weight.r_scale, dim, a)
    } else {
        theta_condition_growing(theta, weight.r_scale, dim, a)
    };
    if !condition_ok {
        return Err(Error::Precondition(format!(
            "smallness condition (1 - theta) R^2 >= |a| (n + shifted exponent) fails \
             for theta = {theta}, R = {}, a = {a}, n = {dim}",
            weight.r_scale
        )));
    }

    let theta_inv = 1.0 / theta;
    let beta = |t: f64| (-(1.0 - theta_inv) * t).exp();
    let probe_times = [0.25, 1.0, 4.0];
    let mut trials = Vec::new();
    let mut worst_bessel = 0.0f64;
    let mut worst_green = 0.0f64;

    if a >= 0.0 {
        // Periodic band-limited fields are legitimate members of the weighted
        // space (the sup over all of space is attained in the central period),
        // and the discrete multipliers act on them exactly, so the bound is
        // checked on the full-torus norm.
        for trial in 0..n_trials {
            let seed = 0xB0_u64 + trial as u64;
            let phi = band_limited_field(grid, seed, false)?;
            let base = weighted_norm(&phi, weight)?;
            let b_ratio = weighted_norm(&apply_bessel(&phi)?, weight)? / base;
            let mut g_ratio = 0.0f64;
            for &t in &probe_times {
                let g = apply_green(&phi, t, 1.0)?;
                g_ratio = g_ratio.max(weighted_norm(&g, weight)? / (beta(t) * base));
            }
            worst_bessel = worst_bessel.max(b_ratio);
            worst_green = worst_green.max(g_ratio);
            trials.push(BoundTrial {
                seed,
                bessel_ratio: b_ratio,
                green_ratio: g_ratio,
            });
        }
    } else {
        // Growing weight: compare B Lambda against (1/theta) Lambda node by
        // node inside the window. The periodic extension distorts Lambda near
        // the boundary, which the inner window keeps out of view.
        let lambda = weight.field(grid);
        let b_lambda = apply_bessel(&lambda)?;
        let g = grid;
        let mut b_ratio = 0.0f64;
        for i in 0..g.len() {
            if g.is_inner(i) {
                b_ratio = b_ratio.max(b_lambda.values()[i] / lambda.values()[i]);
            }
        }
        let mut g_ratio = 0.0f64;
        for &t in &probe_times {
            let gl = apply_green(&lambda, t, 1.0)?;
            for i in 0..g.len() {
                if g.is_inner(i) {
                    g_ratio = g_ratio.max(gl.values()[i] / (beta(t) * lambda.values()[i]));
                }
            }
        }
        worst_bessel = b_ratio;
        worst_green = g_ratio;
        trials.push(BoundTrial {
            seed: 0,
            bessel_ratio: b_ratio,
            green_ratio: g_ratio,
        });
    }

    let tol = 1.0 + 1e-9;
    let holds = worst_bessel <= theta_inv * tol && worst_green <= tol;
    Ok(BoundReport {
        theta_inv,
        trials,
        worst_bessel,
        worst_green,
        holds,
    })
}

/// Report from [`verify_weight_sandwich`].
#[derive(Debug, Clone)]
pub struct SandwichReport {
    /// Worst violation of `eps Lambda <= B Lambda` (non-positive when it holds).
    pub lower_violation: f64,
    /// Worst violation of `B Lambda <= (1/theta) Lambda`.
    pub upper_violation: f64,
    /// Worst violation of `G(t) Lambda_{rho,d} <= Lambda_{rho + k t, d}`.
    pub green_upper_violation: f64,
    /// Worst violation of `G(t) Lambda_{rho,d} >= Lambda_{rho + k_lo t, d} - drift`,
    /// checked at the small rate `k_lo`.
    pub green_lower_violation: f64,
    /// Drift rates used for the upper and lower Green comparisons.
    pub k_upper: f64,
    pub k_lower: f64,
    pub holds: bool,
}

/// Parameters for the two-sided weight comparison.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SandwichParams {
    /// Weight offset `rho` (plays the role of `R^2`).
    pub rho: f64,
    /// Weight exponent `d` (must lie in the admissible set `J_n`).
    pub d: f64,
    /// Lower comparison constant `eps` in `(0, 1)`.
    pub eps: f64,
    /// Upper comparison constant `theta` in `(0, 1)`.
    pub theta: f64,
    /// Probe times for the Green-operator sandwich.
    pub times: [f64; 3],
}

impl Default for SandwichParams {
    fn default() -> Self {
        SandwichParams {
            rho: 4.0,
            d: 2.0,
            eps: 0.5,
            theta: 0.5,
            times: [0.25, 1.0, 4.0],
        }
    }
}

/// Verify the two-sided bounds
/// `eps Lambda <= B Lambda <= (1/theta) Lambda` (pointwise, inner window) and
/// the Green-operator sandwich `G(t) Lambda_{rho,d} <= Lambda_{rho + k t, d}`
/// for `k >= k0 = 4 (n + |d - 2|)`, together with the lower counterpart at a
/// small drift rate.
///
/// Preconditions (verified, with the failing inequality named in the error):
/// `rho >= max(rho1, rho2)` with
/// `rho1 = (n |d| + |d (d - 2)|) / (1/eps - 1)` and
/// `rho2 = (n |d| + |d (d - 2)|) / (1 - theta)`; for the Green upper bound,
/// `rho >= 2 |(d - 2)(n + |d - 4|)|`.
pub fn verify_weight_sandwich(
    grid: &Arc<GridSpec>,
    params: SandwichParams,
) -> Result<SandwichReport> {
    let SandwichParams {
        rho,
        d,
        eps,
        theta,
        times,
    } = params;
    let dim = grid.dim();
    if !(eps > 0.0 && eps < 1.0) || !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps and theta must lie in (0, 1), got eps = {eps}, theta = {theta}"
        )));
    }
    if !jn_contains(dim, d) {
        return Err(Error::Precondition(format!(
            "exponent d = {d} violates d (d + n - 2) >= 0 in dimension {dim}"
        )));
    }
    let nf = dim as f64;
    let numer = nf * d.abs() + (d * (d - 2.0)).abs();
    let rho1 = numer / (1.0 / eps - 1.0);
    let rho2 = numer / (1.0 - theta);
    let rho0 = rho1.max(rho2);
    if rho < rho0 {
        return Err(Error::Precondition(format!(
            "rho = {rho} below the two-sided threshold rho0 = max({rho1:.6}, {rho2:.6}); \
             need rho >= (n |d| + |d (d - 2)|) / min(1/eps - 1, 1 - theta)"
        )));
    }
    let rho_green = 2.0 * ((d - 2.0) * (nf + (d - 4.0).abs())).abs();
    if rho < rho_green {
        return Err(Error::Precondition(format!(
            "rho = {rho} below the Green-sandwich threshold 2 |(d - 2)(n + |d - 4|)| = {rho_green:.6}"
        )));
    }

    let weight_field =
        |rho_t: f64| -> Field { Field::from_radial(grid, move |r| (rho_t + r * r).powf(d / 2.0)) };

    let lambda = weight_field(rho);
    let b_lambda = apply_bessel(&lambda)?;
    let tol = |v: f64| 1e-8 + 1e-6 * v.abs();

    let mut lower_violation = f64::NEG_INFINITY;
    let mut upper_violation = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        if !grid.is_inner(i) {
            continue;
        }
        let l = lambda.values()[i];
        let bl = b_lambda.values()[i];
        lower_violation = lower_violation.max(eps * l - bl);
        upper_violation = upper_violation.max(bl - l / theta);
    }

    // Green sandwich. Upper drift rate from the closed-form threshold; lower
    // rate from the small-k bound (dimension-dependent).
    let k_upper = 4.0 * (nf + (d - 2.0).abs());
    let k_lower = if dim == 1 {
        (2.0 + 2.0 * (d - 2.0).min(0.0)) / (1.0 + 1.0 / rho)
    } else {
        (4.0 + 2.0 * (d - 2.0).min(0.0)) / (1.0 + 2.0 * nf / rho)
    }
    .max(0.0);

    let mut green_upper_violation = f64::NEG_INFINITY;
    let mut green_lower_violation = f64::NEG_INFINITY;
    for &t in &times {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sandwich probe times must be positive, got {t}"
            )));
        }
        let g_lambda = apply_green(&lambda, t, 1.0)?;
        let upper = weight_field(rho + k_upper * t);
        let lower = weight_field(rho + k_lower * t);
        for i in 0..grid.len() {
            if !grid.is_inner(i) {
                continue;
            }
            green_upper_violation =
                green_upper_violation.max(g_lambda.values()[i] - upper.values()[i]);
            green_lower_violation =
                green_lower_violation.max(lower.values()[i] - g_lambda.values()[i]);
        }
    }

    let sup_scale = lambda.sup_norm_inner();
    let holds = lower_violation <= tol(sup_scale)
        && upper_violation <= tol(sup_scale)
        && green_upper_violation <= tol(sup_scale)
        && green_lower_violation <= tol(sup_scale);
    Ok(SandwichReport {
        lower_violation,
        upper_violation,
        green_upper_violation,
        green_lower_violation,
        k_upper,
        k_lower,
        holds,
    })
}
