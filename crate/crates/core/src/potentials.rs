//! Admissible potentials `V(x, t)` and their time-integral asymptotics.
//!
//! The source term is `V(x, t) u^p` with a potential that factorizes as
//! `V(x, t) = v(x) Lambda(t)`. The spatial part is either `|x|^sigma` or the
//! regular variant `(1 + |x|^2)^{sigma/2}`; the time part is
//!
//! ```text
//!     Lambda(t) = zeta(t) * (1 + t)^nu * t^k,
//! ```
//!
//! where `zeta` is a slowly varying factor (constant, a power of `ln(e + t)`,
//! or a user table). Everything the long-time theory needs about `Lambda` is
//! carried by its primitive `Lambda_*(t) = int_0^t Lambda`, computed here by
//! trapezoidal quadrature on a graded mesh, together with a closed-form
//! asymptotic descriptor (`t^q`, `(ln t)^q`, `ln ln t`, or bounded) and an
//! empirical check of the epsilon-monotonicity property
//! `inf_t Lambda_*(eps t) / Lambda_*(t) > 0` that admissible classes satisfy.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Slowly varying factor `zeta(t)` in the time part of the potential.
///
/// The logarithm is offset as `ln(e + t)` so the factor is smooth, positive
/// and equal to one at `t = 0` for every exponent; the offset does not affect
/// asymptotics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowFactor {
    Constant { value: f64 },
    LogPow { exponent: f64 },
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl SlowFactor {
    pub fn validate(&self) -> Result<()> {
        match self {
            SlowFactor::Constant { value } => {
                // Zero is admitted: it describes the forcing-free problem.
                if !(*value >= 0.0) || !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant slow factor must be non-negative, got {value}"
                    )));
                }
            }
            SlowFactor::LogPow { exponent } => {
                if !exponent.is_finite() {
                    return Err(Error::InvalidParameter(
                        "log-power exponent must be finite".into(),
                    ));
                }
            }
            SlowFactor::Table { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated slow factor needs matching times/values with >= 2 rows".into(),
                    ));
                }
                if times[0] != 0.0 {
                    return Err(Error::InvalidParameter(
                        "tabulated slow factor must start at t = 0".into(),
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter(
                        "tabulated slow factor times must be strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "tabulated slow factor values must be finite and non-negative".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluate at `t >= 0`. Tables are interpolated linearly and held
    /// constant beyond the last node.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SlowFactor::Constant { value } => *value,
            SlowFactor::LogPow { exponent } => (std::f64::consts::E + t).ln().powf(*exponent),
            SlowFactor::Table { times, values } => {
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                let j = times.partition_point(|&s| s <= t).max(1);
                let (t0, t1) = (times[j - 1], times[j]);
                let (v0, v1) = (values[j - 1], values[j]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Spatial profile of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialFactor {
    /// `|x|^sigma` (requires `sigma >= 0`).
    Power,
    /// `(1 + |x|^2)^{sigma/2}`, regular at the origin for every `sigma`.
    Shifted,
}

/// A factorized potential `V(x, t) = v(x) Lambda(t + t_offset)` with
/// `Lambda(t) = zeta(t) (1 + t)^nu t^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// Spatial growth exponent `sigma`.
    #[serde(default)]
    pub sigma: f64,
    /// Exponent of `(1 + t)`.
    #[serde(default)]
    pub nu: f64,
    /// Exponent of the pure power `t^k`.
    #[serde(default)]
    pub k_exp: f64,
    /// Slow factor `zeta(t)`.
    #[serde(default = "default_zeta")]
    pub zeta: SlowFactor,
    /// For `k < 0` the factor `t^k` is evaluated at `max(t, t_clamp)` so the
    /// potential stays finite at `t = 0`.
    #[serde(default = "default_t_clamp")]
    pub t_clamp: f64,
    /// Spatial profile variant.
    #[serde(default = "default_spatial")]
    pub spatial: SpatialFactor,
    /// Time shift: the potential seen by a restarted run at time `t` is the
    /// original one at `t + t_offset`.
    #[serde(default)]
    pub t_offset: f64,
}

fn default_zeta() -> SlowFactor {
    SlowFactor::Constant { value: 1.0 }
}

fn default_t_clamp() -> f64 {
    1e-6
}

fn default_spatial() -> SpatialFactor {
    SpatialFactor::Shifted
}

impl Default for PotentialSpec {
    /// The unit potential `V = 1`.
    fn default() -> Self {
        PotentialSpec {
            sigma: 0.0,
            nu: 0.0,
            k_exp: 0.0,
            zeta: default_zeta(),
            t_clamp: default_t_clamp(),
            spatial: default_spatial(),
            t_offset: 0.0,
        }
    }
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        self.zeta.validate()?;
        if !self.sigma.is_finite() || !self.nu.is_finite() || !self.k_exp.is_finite() {
            return Err(Error::InvalidParameter(
                "potential exponents must be finite".into(),
            ));
        }
        if !(self.t_clamp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_clamp must be positive, got {}",
                self.t_clamp
            )));
        }
        if self.spatial == SpatialFactor::Power && self.sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "the pure power profile |x|^sigma needs sigma >= 0 (got {}); \
                 use the shifted profile for negative exponents",
                self.sigma
            )));
        }
        if !(self.t_offset >= 0.0) || !self.t_offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_offset must be non-negative, got {}",
                self.t_offset
            )));
        }
        Ok(())
    }

    /// Effective large-time power: `Lambda(t) ~ zeta(t) t^{nu + k}`.
    pub fn effective_time_power(&self) -> f64 {
        self.nu + self.k_exp
    }

    /// Time factor `Lambda(t)` (without the offset).
    pub fn lambda(&self, t: f64) -> f64 {
        let tk = if self.k_exp < 0.0 {
            t.max(self.t_clamp).powf(self.k_exp)
        } else if self.k_exp == 0.0 {
            1.0
        } else {
            t.powf(self.k_exp)
        };
        self.zeta.eval(t) * (1.0 + t).powf(self.nu) * tk
    }

    /// Spatial factor at radius `r`.
    pub fn spatial_at(&self, r: f64) -> f64 {
        match self.spatial {
            SpatialFactor::Power => {
                if self.sigma == 0.0 {
                    1.0
                } else {
                    r.powf(self.sigma)
                }
            }
            SpatialFactor::Shifted => (1.0 + r * r).powf(self.sigma / 2.0),
        }
    }

    /// Full potential `V(x, t)` at radius `r` and time `t` (offset applied).
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        self.spatial_at(r) * self.lambda(t + self.t_offset)
    }

    /// A copy shifted in time by `delta` (composition of shifts).
    pub fn shifted(&self, delta: f64) -> PotentialSpec {
        let mut out = self.clone();
        out.t_offset += delta;
        out
    }
}

/// Tabulated primitive `Lambda_*(t) = int_0^t Lambda(tau) d tau`.
#[derive(Debug, Clone)]
pub struct LambdaStar {
    times: Vec<f64>,
    values: Vec<f64>,
    /// True when `k <= -1`, in which case the exact integral diverges at the
    /// origin and the tabulated one depends on the clamp `t_clamp`.
    pub clamped_origin: bool,
}

impl LambdaStar {
    /// Wrap an externally tabulated primitive. The table must start at
    /// `(0, 0)`, have strictly increasing times and non-decreasing values.
    pub fn from_table(times: Vec<f64>, values: Vec<f64>) -> Result<LambdaStar> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidParameter(
                "Lambda_* table needs matching times/values with at least two rows".into(),
            ));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "Lambda_* table must start at (0, 0)".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "Lambda_* table times must be strictly increasing".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0]) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "Lambda_* table values must be finite and non-decreasing".into(),
            ));
        }
        Ok(LambdaStar {
            times,
            values,
            clamped_origin: false,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest tabulated time.
    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Interpolated `Lambda_*(t)`; errors outside the tabulated range.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.t_max() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "Lambda_* evaluated at t = {t} outside tabulated range [0, {}]",
                self.t_max()
            )));
        }
        let t = t.min(self.t_max());
        let j = self.times.partition_point(|&s| s <= t).max(1);
        let j = j.min(self.times.len() - 1);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// `Lambda_*(t) - Lambda_*(s)` for `0 <= s <= t`.
    pub fn integral_between(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::InvalidParameter(format!(
                "integral_between needs s <= t, got s = {s}, t = {t}"
            )));
        }
        Ok(self.eval(t)? - self.eval(s)?)
    }
}

/// Graded time mesh: uniform with step `base_step` on `[0, min(1, t_hi)]`,
/// then geometric (ratio 1.05) up to `t_hi`.
pub fn default_mesh(t_hi: f64, base_step: f64) -> Result<Vec<f64>> {
    if !(t_hi > 0.0) || !(base_step > 0.0) || base_step > t_hi {
        return Err(Error::InvalidParameter(format!(
            "mesh needs 0 < base_step <= t_hi, got base_step = {base_step}, t_hi = {t_hi}"
        )));
    }
    let mut mesh = vec![0.0];
    let linear_end = t_hi.min(1.0);
    let n_lin = (linear_end / base_step).ceil() as usize;
    for i in 1..=n_lin {
        mesh.push(linear_end * i as f64 / n_lin as f64);
    }
    let mut t = linear_end;
    let mut step = base_step;
    while t < t_hi {
        step *= 1.05;
        t = (t + step).min(t_hi);
        mesh.push(t);
    }
    Ok(mesh)
}

/// Trapezoidal primitive of `Lambda` on the given mesh (which must start at
/// zero and be strictly increasing). Exact when `Lambda` is piecewise linear
/// between mesh nodes.
pub fn lambda_star_numeric(spec: &PotentialSpec, mesh: &[f64]) -> Result<LambdaStar> {
    spec.validate()?;
    if mesh.len() < 2 || mesh[0] != 0.0 {
        return Err(Error::InvalidParameter(
            "Lambda_* mesh must start at 0 and contain at least two nodes".into(),
        ));
    }
    if mesh.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "Lambda_* mesh must be strictly increasing".into(),
        ));
    }
    let mut values = Vec::with_capacity(mesh.len());
    let mut acc = 0.0;
    let mut prev_t = mesh[0];
    let mut prev_l = spec.lambda(prev_t);
    values.push(0.0);
    for &t in &mesh[1..] {
        let l = spec.lambda(t);
        if !l.is_finite() {
            return Err(Error::Overflow {
                t,
                sup: l,
                ceiling: f64::MAX,
            });
        }
        acc += 0.5 * (l + prev_l) * (t - prev_t);
        values.push(acc);
        prev_t = t;
        prev_l = l;
    }
    Ok(LambdaStar {
        times: mesh.to_vec(),
        values,
        clamped_origin: spec.k_exp <= -1.0,
    })
}

/// Closed-form large-time behaviour of `Lambda_*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StarAsymptotic {
    /// `Lambda_*` converges (integrable tail).
    Bounded,
    /// `Lambda_* ~ ln ln t` (the border case `t^{-1} (ln t)^{-1}`).
    LogLog,
    /// `Lambda_* ~ (ln t)^q` with `q > 0`.
    LogPow { exponent: f64 },
    /// `Lambda_* ~ t^q (ln t)^s` with `q > 0`.
    PowerLog { power: f64, log_exponent: f64 },
}

impl StarAsymptotic {
    /// Evaluate the descriptor (up to constants) at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let lg = (std::f64::consts::E + t).ln();
        match *self {
            StarAsymptotic::Bounded => 1.0,
            StarAsymptotic::LogLog => lg.ln(),
            StarAsymptotic::LogPow { exponent } => lg.powf(exponent),
            StarAsymptotic::PowerLog {
                power,
                log_exponent,
            } => t.powf(power) * lg.powf(log_exponent),
        }
    }

    /// Whether `Lambda_*` diverges, i.e. the forcing accumulates without
    /// bound (the grow-up situation).
    pub fn diverges(&self) -> bool {
        !matches!(self, StarAsymptotic::Bounded)
    }
}

/// Derive the asymptotic descriptor of `Lambda_*` from the exponents. Not
/// available for tabulated slow factors (their tails are arbitrary).
pub fn lambda_star_asymptotic(spec: &PotentialSpec) -> Result<StarAsymptotic> {
    spec.validate()?;
    let log_m = match &spec.zeta {
        SlowFactor::Constant { .. } => 0.0,
        SlowFactor::LogPow { exponent } => *exponent,
        SlowFactor::Table { .. } => {
            return Err(Error::InvalidParameter(
                "asymptotic descriptor is not defined for tabulated slow factors".into(),
            ))
        }
    };
    let m = spec.effective_time_power();
    let border = (m + 1.0).abs() < 1e-12;
    Ok(if border {
        if (log_m + 1.0).abs() < 1e-12 {
            StarAsymptotic::LogLog
        } else if log_m > -1.0 {
            StarAsymptotic::LogPow {
                exponent: log_m + 1.0,
            }
        } else {
            StarAsymptotic::Bounded
        }
    } else if m > -1.0 {
        StarAsymptotic::PowerLog {
            power: m + 1.0,
            log_exponent: log_m,
        }
    } else {
        StarAsymptotic::Bounded
    })
}

/// Report of the epsilon-monotonicity probe.
#[derive(Debug, Clone)]
pub struct EpsilonAbReport {
    pub eps: f64,
    /// Sampled ratios `Lambda_*(eps t_j) / Lambda_*(t_j)` at doubling times.
    pub ratios: Vec<(f64, f64)>,
    /// Minimum observed ratio (the empirical constant `c(eps)`).
    pub c_estimate: f64,
    /// True when the last three ratios agree within 20% (the sequence has
    /// stabilized inside the tabulated horizon).
    pub stable: bool,
    /// Verdict: stabilized with a strictly positive constant.
    pub member: bool,
}

/// Probe the admissibility property `Lambda_*(eps t) >= c Lambda_*(t)` on a
/// dyadic sequence `t_j = (t_lo / eps) 2^j`, `j = 0..12`. The table must
/// cover `[0, (t_lo / eps) 2^11]`.
pub fn epsilon_ab_check(star: &LambdaStar, eps: f64, t_lo: f64) -> Result<EpsilonAbReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    if !(t_lo > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_lo must be positive, got {t_lo}"
        )));
    }
    let mut ratios = Vec::with_capacity(12);
    let mut c = f64::INFINITY;
    for j in 0..12 {
        let t = (t_lo / eps) * f64::powi(2.0, j);
        let denom = star.eval(t)?;
        if denom <= 0.0 {
            return Err(Error::Precondition(format!(
                "Lambda_*({t}) is not positive; the probe needs a non-trivial potential"
            )));
        }
        let ratio = star.eval(eps * t)? / denom;
        c = c.min(ratio);
        ratios.push((t, ratio));
    }
    let tail: Vec<f64> = ratios.iter().rev().take(3).map(|(_, r)| *r).collect();
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    let stable = lo > 0.0 && hi / lo <= 1.2;
    let member = stable && c > 1e-8;
    Ok(EpsilonAbReport {
        eps,
        ratios,
        c_estimate: c,
        stable,
        member,
    })
}

/// The two critical weight exponents of the long-time theory for
/// `V ~ |x|^sigma t^m`: data growing faster than `a_crit` keeps its own
/// profile (rate `t^{a/2}`), anything slower is dragged up to the forcing
/// rate `t^{a_crit / 2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponents {
    /// `a_0 = sigma / (1 - p)`: minimal growth generated by the source.
    pub a_zero: f64,
    /// `a_crit = (sigma + 2 (m + 1)_+) / (1 - p)`.
    pub a_crit: f64,
}

/// Regime of the grow-up rate for initial data of growth exponent `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthRegime {
    /// `a > a_crit`: the data profile dominates, sup norm ~ `t^{a/2}`.
    DataDriven,
    /// `a <= a_crit`: the forcing dominates, sup norm ~ `t^{a_crit/2}`.
    ForcingDriven,
}

/// Compute the critical exponents for sublinearity `p`, spatial growth
/// `sigma >= 0` and effective time power `m`.
pub fn critical_exponents(p: f64, sigma: f64, m: f64) -> Result<CriticalExponents> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sublinearity exponent must lie in (0, 1), got {p}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "critical exponents are defined for sigma >= 0, got {sigma}"
        )));
    }
    Ok(CriticalExponents {
        a_zero: sigma / (1.0 - p),
        a_crit: (sigma + 2.0 * (m + 1.0).max(0.0)) / (1.0 - p),
    })
}

/// Predicted polynomial rate of `sup u(t)` (exponent of `t`) for data of
/// growth exponent `a`, together with the regime.
pub fn predicted_growth(a: f64, crit: CriticalExponents) -> (f64, GrowthRegime) {
    if a > crit.a_crit {
        (a / 2.0, GrowthRegime::DataDriven)
    } else {
        (crit.a_crit / 2.0, GrowthRegime::ForcingDriven)
    }
}

/// Sublinearity threshold `p_0 = eps_0 * (v_min / v_max)` below which the
/// delayed-branch construction applies uniformly over a potential class with
/// spatial part pinched between `v_min` and `v_max` and epsilon-monotonicity
/// constant `eps_0`.
pub fn p0_threshold(eps0: f64, v_min: f64, v_max: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps0 must lie in (0, 1], got {eps0}"
        )));
    }
    if !(v_min > 0.0) || !(v_max >= v_min) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < v_min <= v_max, got v_min = {v_min}, v_max = {v_max}"
        )));
    }
    Ok(eps0 * v_min / v_max)
}

/// Smooth radial taper: one on `[0, 0.5 L]`, a squared cosine ramp on
/// `[0.5 L, 0.75 L]`, zero beyond. Applied to potentials and growing data so
/// that periodic wrap-around does not feed the inner window.
pub fn radial_taper(r: f64, half_width: f64) -> f64 {
    let inner = 0.5 * half_width;
    let outer = 0.75 * half_width;
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        let s = (r - inner) / (outer - inner);
        let c = (0.5 * std::f64::consts::PI * s).cos();
        c * c
    }
}
