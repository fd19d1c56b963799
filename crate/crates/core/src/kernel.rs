//! Bessel potential kernel, modified Bessel functions, and multiplier symbols.
//!
//! The operator `B_nu = (I - Laplacian)^{-nu}` on `R^n` is a convolution with
//! the radial kernel
//!
//! ```text
//!     B_nu(r) = 2^{1-nu} / ((2 pi)^{n/2} Gamma(nu)) * r^{nu - n/2} * K_{n/2 - nu}(r),
//! ```
//!
//! normalized so that its Fourier multiplier is `(1 + |xi|^2)^{-nu}` (total
//! mass one). `K_alpha` is the modified Bessel function of the second kind,
//! evaluated by an ascending series for small argument and by the large-`z`
//! asymptotic expansion beyond `z = 9`, with stable forward recurrence in the
//! order. Grid operators never touch this pointwise kernel — they go through
//! the multipliers below — so the kernel exists for validation tables and
//! lower-bound checks.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover argument between the ascending series and the cosh-integral
/// quadrature for `K_alpha`. Below this the series loses at most a digit to
/// cancellation; above it the quadrature is accurate to machine precision.
const K_SERIES_QUADRATURE_CROSSOVER: f64 = 1.0;

/// Crossover to the large-argument asymptotic expansion, whose smallest term
/// is ~e^{-2z} relative: far below roundoff from here on.
const K_QUADRATURE_ASYMPTOTIC_CROSSOVER: f64 = 300.0;

/// Orders closer than this to an integer are snapped to the integer-order
/// series (the reflection formula degenerates as `sin(pi a) -> 0`).
const K_INTEGER_SNAP: f64 = 1e-5;

/// Gamma function for real arguments via the Lanczos approximation (g = 7,
/// nine coefficients), with the reflection formula for `x < 0.5`. Poles at
/// non-positive integers return non-finite values.
pub fn gamma_fn(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    let t = x + 7.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Modified Bessel function of the first kind by its ascending series.
/// Valid for any real order `a` that is not a negative integer.
fn bessel_i_series(a: f64, z: f64) -> f64 {
    let q = z * z / 4.0;
    let mut term = (z / 2.0).powf(a) / gamma_fn(a + 1.0);
    let mut sum = term;
    for k in 0..400 {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (a + kf + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `K_m` for non-negative integer order `m` by the standard logarithmic
/// series (accurate for `z` below the asymptotic crossover).
fn bessel_k_integer_series(m: u32, z: f64) -> f64 {
    let q = z * z / 4.0;
    let lg = (z / 2.0).ln();
    let i_m = bessel_i_series(m as f64, z);

    // Finite sum: 1/2 (z/2)^{-m} sum_{k<m} (m-k-1)!/k! (-q)^k
    let mut finite = 0.0;
    if m > 0 {
        let mut num = gamma_fn(m as f64); // (m-1)!
        let mut den = 1.0; // k!
        let mut sign_q = 1.0; // (-q)^k
        for k in 0..m {
            finite += num / den * sign_q;
            num /= (m - 1 - k).max(1) as f64;
            den *= (k + 1) as f64;
            sign_q *= -q;
        }
        finite *= 0.5 * (z / 2.0).powi(-(m as i32));
    }

    // Series with digamma weights: psi(1) = -gamma, psi(j+1) = psi(j) + 1/j.
    let mut psi_a = -EULER_GAMMA; // psi(k+1)
    let mut psi_b = -EULER_GAMMA; // psi(k+m+1)
    for j in 1..=m {
        psi_b += 1.0 / j as f64;
    }
    let mut term = 1.0 / gamma_fn(m as f64 + 1.0); // q^k / (k! (m+k)!) at k = 0
    let mut ser = 0.0;
    for k in 0..400 {
        let kf = k as f64;
        ser += (psi_a + psi_b) * term;
        term *= q / ((kf + 1.0) * (kf + m as f64 + 1.0));
        psi_a += 1.0 / (kf + 1.0);
        psi_b += 1.0 / (kf + m as f64 + 1.0);
        if term < 1e-20 * ser.abs().max(1e-300) {
            break;
        }
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    ser *= sign * 0.5 * (z / 2.0).powi(m as i32);

    finite - sign * lg * i_m + ser
}

/// `K_a(z)` by trapezoidal quadrature of the cosh-integral representation
/// `K_a(z) = int_0^inf e^{-z cosh t} cosh(a t) dt`, with the overall factor
/// `e^{-z}` split off. The integrand is analytic in a strip and decays
/// double-exponentially, so the uniform trapezoidal rule converges
/// geometrically; the step is refined for large `z`, where the integrand
/// narrows to width ~ 1/sqrt(z). Used for moderate orders (the caller
/// recures upward from orders in [0, 2]).
fn bessel_k_quadrature(a: f64, z: f64) -> f64 {
    let h = (0.25 / z.sqrt()).min(0.05);
    // Truncate once z (cosh t - 1) - |a| t exceeds ~45: the remaining tail
    // is e^{-45} relative to the peak.
    let a = a.abs();
    let mut t_max = (1.0 + 45.0 / z).acosh().max(0.5);
    while z * (t_max.cosh() - 1.0) - a * t_max < 45.0 {
        t_max += 0.5;
    }
    let n = (t_max / h).ceil() as usize;
    let mut sum = 0.5; // integrand at t = 0, half trapezoid weight
    for j in 1..=n {
        let t = j as f64 * h;
        let lg = -z * (t.cosh() - 1.0);
        // cosh(a t) e^{lg} without overflowing cosh on its own.
        sum += 0.5 * ((lg + a * t).exp() + (lg - a * t).exp());
    }
    h * sum * (-z).exp()
}

/// Large-argument asymptotic expansion of `K_a`, truncated at the smallest
/// term (divergence onset) or at 1e-18 relative.
fn bessel_k_asymptotic(a: f64, z: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..80 {
        let kf = k as f64;
        let next = term * (4.0 * a * a - (2.0 * kf + 1.0).powi(2)) / (8.0 * (kf + 1.0) * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

/// Modified Bessel function of the second kind `K_alpha(z)` for real order
/// and `z > 0`. Even in the order, so `alpha` may be negative. Orders within
/// `1e-5` of an integer are snapped to the integer-order series; in that
/// window the relative error can reach ~1e-4 (the absolute error stays far
/// below the validation tolerances used in this crate).
pub fn bessel_k(alpha: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bessel_k requires z > 0, got {z}"
        )));
    }
    let a = alpha.abs();
    if a > 120.0 {
        return Err(Error::InvalidParameter(format!(
            "bessel_k order |alpha| = {a} out of supported range (<= 120)"
        )));
    }

    // Split the order as a = mu + n_up with mu in [0, 1); evaluate K_mu and
    // K_{mu+1}, then recur upward (forward recurrence is stable for K).
    let rounded = a.round();
    let (mu, n_up) = if (a - rounded).abs() < K_INTEGER_SNAP {
        (0.0, rounded as u32)
    } else {
        (a.fract(), a.floor() as u32)
    };

    let (mut k0, mut k1) = if z >= K_QUADRATURE_ASYMPTOTIC_CROSSOVER {
        (bessel_k_asymptotic(mu, z), bessel_k_asymptotic(mu + 1.0, z))
    } else if z >= K_SERIES_QUADRATURE_CROSSOVER {
        (bessel_k_quadrature(mu, z), bessel_k_quadrature(mu + 1.0, z))
    } else if mu == 0.0 {
        (bessel_k_integer_series(0, z), bessel_k_integer_series(1, z))
    } else {
        // Reflection: K_mu = pi/2 (I_{-mu} - I_mu) / sin(pi mu), and
        // K_{mu+1} = pi/2 (I_{mu+1} - I_{-mu-1}) / sin(pi mu).
        let s = (std::f64::consts::PI * mu).sin();
        let half_pi = std::f64::consts::PI / 2.0;
        (
            half_pi * (bessel_i_series(-mu, z) - bessel_i_series(mu, z)) / s,
            half_pi * (bessel_i_series(mu + 1.0, z) - bessel_i_series(-mu - 1.0, z)) / s,
        )
    };

    if n_up == 0 {
        return Ok(k0);
    }
    let mut nu = mu + 1.0;
    for _ in 0..n_up.saturating_sub(1) {
        let k2 = k0 + (2.0 * nu / z) * k1;
        k0 = k1;
        k1 = k2;
        nu += 1.0;
    }
    Ok(k1)
}

/// A pointwise kernel evaluation request: dimension `1..=3`, order `nu > 0`,
/// radius `r >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery {
    pub dim: u32,
    pub order: f64,
    pub radius: f64,
}

/// Evaluate the Bessel potential kernel `B_nu(r)` in dimension `n`.
///
/// `r = 0` is admitted only when `2 nu > n` (otherwise the kernel is
/// singular at the origin), in which case the closed form
/// `Gamma(nu - n/2) / ((4 pi)^{n/2} Gamma(nu))` is returned.
pub fn bessel_kernel_eval(q: &KernelQuery) -> Result<f64> {
    let n = q.dim;
    let nu = q.order;
    let r = q.radius;
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "kernel dimension must be 1, 2 or 3, got {n}"
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kernel order must be positive, got {nu}"
        )));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kernel radius must be non-negative, got {r}"
        )));
    }
    let nf = n as f64;
    if r == 0.0 {
        if 2.0 * nu > nf {
            let four_pi = 4.0 * std::f64::consts::PI;
            return Ok(gamma_fn(nu - nf / 2.0) / (four_pi.powf(nf / 2.0) * gamma_fn(nu)));
        }
        return Err(Error::InvalidParameter(format!(
            "kernel is singular at r = 0 for 2 nu <= n (nu = {nu}, n = {n})"
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let prefactor = 2f64.powf(1.0 - nu) / (two_pi.powf(nf / 2.0) * gamma_fn(nu));
    let k = bessel_k(nf / 2.0 - nu, r)?;
    Ok(prefactor * r.powf(nu - nf / 2.0) * k)
}

/// Convenience wrapper over [`bessel_kernel_eval`].
pub fn bessel_kernel(dim: u32, order: f64, radius: f64) -> Result<f64> {
    bessel_kernel_eval(&KernelQuery { dim, order, radius })
}

/// The profile `phi_0` in the kernel lower bound `B(x) >= b0 phi_0(x) e^{-|x|}`:
/// `|x|^{(1-n)/2}` except in dimension two below radius one, where it is
/// `1 - ln |x|`.
pub fn kernel_lower_profile(dim: u32, r: f64) -> Result<f64> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!(
            "kernel dimension must be 1, 2 or 3, got {dim}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lower-bound profile requires r > 0, got {r}"
        )));
    }
    if dim == 2 && r < 1.0 {
        Ok(1.0 - r.ln())
    } else {
        Ok(r.powf((1.0 - dim as f64) / 2.0))
    }
}

/// Result of sampling the kernel lower bound `B >= b0 phi_0 e^{-r}`.
#[derive(Debug, Clone)]
pub struct KernelBounds {
    /// Empirical constant: the minimum of `B(r) / (phi_0(r) e^{-r})` over
    /// the sample set.
    pub b0_estimate: f64,
    /// Sampled `(r, ratio)` pairs.
    pub ratios: Vec<(f64, f64)>,
    /// True when the estimate is finite and strictly positive.
    pub all_positive: bool,
}

/// Sample `B_1(r) / (phi_0(r) e^{-r})` over `r_samples` and report the
/// empirical lower-bound constant.
pub fn kernel_lower_bound_check(dim: u32, r_samples: &[f64]) -> Result<KernelBounds> {
    if r_samples.is_empty() {
        return Err(Error::InvalidParameter(
            "kernel_lower_bound_check needs at least one sample radius".into(),
        ));
    }
    let mut ratios = Vec::with_capacity(r_samples.len());
    let mut b0 = f64::INFINITY;
    for &r in r_samples {
        let b = bessel_kernel(dim, 1.0, r)?;
        let profile = kernel_lower_profile(dim, r)? * (-r).exp();
        let ratio = b / profile;
        b0 = b0.min(ratio);
        ratios.push((r, ratio));
    }
    Ok(KernelBounds {
        b0_estimate: b0,
        ratios,
        all_positive: b0.is_finite() && b0 > 0.0,
    })
}

/// Fourier multiplier symbols used by the grid operators. `xi_sq` denotes
/// `|xi|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    /// `(1 + |xi|^2)^{-1}`, the symbol of `B = (I - Laplacian)^{-1}`.
    Bessel,
    /// `(1 + k |xi|^2)^{-1}`, the symbol of `(I - k Laplacian)^{-1}` for the
    /// generalized-viscosity equation.
    BesselVisc { k_visc: f64 },
    /// `exp(-t |xi|^2 / (1 + k |xi|^2))`, the symbol of the Green operator
    /// `G(t)`; equals `e^{-t/k} e^{(t/k) B_k}`.
    Green { t: f64, k_visc: f64 },
}

impl Multiplier {
    /// Validate the symbol parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Multiplier::Bessel => Ok(()),
            Multiplier::BesselVisc { k_visc } | Multiplier::Green { k_visc, t: _ } => {
                if !(k_visc > 0.0) || !k_visc.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "viscosity must be positive, got {k_visc}"
                    )));
                }
                if let Multiplier::Green { t, .. } = *self {
                    if !(t >= 0.0) || !t.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "Green operator time must be non-negative, got {t}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluate the symbol at `|xi|^2 = xi_sq >= 0`. Always in `(0, 1]`.
    pub fn eval(&self, xi_sq: f64) -> f64 {
        match *self {
            Multiplier::Bessel => 1.0 / (1.0 + xi_sq),
            Multiplier::BesselVisc { k_visc } => 1.0 / (1.0 + k_visc * xi_sq),
            Multiplier::Green { t, k_visc } => (-t * xi_sq / (1.0 + k_visc * xi_sq)).exp(),
        }
    }
}

/// Validated evaluation of a multiplier symbol.
pub fn multiplier(symbol: Multiplier, xi_sq: f64) -> Result<f64> {
    symbol.validate()?;
    if !(xi_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "multiplier argument must satisfy xi_sq >= 0, got {xi_sq}"
        )));
    }
    Ok(symbol.eval(xi_sq))
}
