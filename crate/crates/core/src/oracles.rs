//! Closed-form reference solutions ("oracles") for validating the solver.
//!
//! For spatially constant states and potentials `V = Lambda(t)`, the full
//! evolution collapses to the scalar problem `v' = Lambda(t) v^p`, which is
//! solvable in closed form because `0 < p < 1`:
//!
//! * from data `c >= 0` the unique maximal trajectory is
//!   `Phi(t; c) = (c^{1-p} + (1-p) Lambda_*(t))^{1/(1-p)}`;
//! * from zero data there is a one-parameter family of "delayed" solutions
//!   `u_kappa(t) = ((1-p) (Lambda_*(t) - Lambda_*(kappa)))_+^{1/(1-p)}`,
//!   one for each ignition time `kappa`, plus the identically zero one —
//!   the scalar germ of non-uniqueness for sublinear sources;
//! * the damped model `v' = v^p - v` relaxes to the equilibrium `1` along
//!   `psi(t) = ((A^{1-p} - 1) e^{-(1-p) t} + 1)^{1/(1-p)}`.
//!
//! None of these routines touch the spectral solver; they are independent
//! evaluation paths for the verification harness.

use crate::error::{Error, Result};

fn check_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sublinearity exponent must lie in (0, 1), got {p}"
        )));
    }
    Ok(1.0 / (1.0 - p))
}

/// Closed-form time factor for the scalar oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeLambda {
    /// `Lambda(t) = value`.
    Constant { value: f64 },
    /// `Lambda(t) = coeff * t^exponent` with `exponent > -1` (integrable at
    /// the origin).
    Power { coeff: f64, exponent: f64 },
}

impl TimeLambda {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TimeLambda::Constant { value } => {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant time factor must be non-negative, got {value}"
                    )));
                }
            }
            TimeLambda::Power { coeff, exponent } => {
                if !(coeff >= 0.0) || !coeff.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "power time factor needs coeff >= 0, got {coeff}"
                    )));
                }
                if !(exponent > -1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power time factor needs exponent > -1, got {exponent}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeLambda::Constant { value } => value,
            TimeLambda::Power { coeff, exponent } => {
                if exponent == 0.0 {
                    coeff
                } else {
                    coeff * t.powf(exponent)
                }
            }
        }
    }

    /// Exact primitive `Lambda_*(t) = int_0^t Lambda`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            TimeLambda::Constant { value } => value * t,
            TimeLambda::Power { coeff, exponent } => {
                coeff * t.powf(exponent + 1.0) / (exponent + 1.0)
            }
        }
    }

    /// Exact `int_s^t Lambda` for `0 <= s <= t`.
    pub fn integral_from(&self, s: f64, t: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0 <= s && s <= t) {
            return Err(Error::InvalidParameter(format!(
                "integral_from needs 0 <= s <= t, got s = {s}, t = {t}"
            )));
        }
        Ok(self.integral(t) - self.integral(s))
    }
}

/// Maximal scalar trajectory `Phi(t; c)` of `v' = Lambda v^p`, `v(0) = c`,
/// expressed through the accumulated forcing `lambda_star = Lambda_*(t)`.
pub fn phi_lambda(p: f64, c: f64, lambda_star: f64) -> Result<f64> {
    let q = check_p(p)?;
    if !(c >= 0.0) || !(lambda_star >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "phi_lambda needs c >= 0 and lambda_star >= 0, got c = {c}, lambda_star = {lambda_star}"
        )));
    }
    Ok((c.powf(1.0 - p) + (1.0 - p) * lambda_star).powf(q))
}

/// Delayed solution from zero data with ignition time `kappa`:
/// `u_kappa(t) = ((1-p) int_kappa^t Lambda)_+^{1/(1-p)}`. For `t <= kappa`
/// the value is zero.
pub fn delayed_solution(p: f64, lam: &TimeLambda, kappa: f64, t: f64) -> Result<f64> {
    let q = check_p(p)?;
    lam.validate()?;
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ignition time must be non-negative, got {kappa}"
        )));
    }
    if t <= kappa {
        return Ok(0.0);
    }
    let acc = lam.integral_from(kappa, t)?;
    Ok(((1.0 - p) * acc).max(0.0).powf(q))
}

/// The full zero-data solution family of `v' = Lambda v^p` evaluated at `t`:
/// the delayed branches for the given ignition times plus (conceptually) the
/// identically zero member, which corresponds to `kappa = +infinity`.
pub fn delayed_family(p: f64, lam: &TimeLambda, kappas: &[f64], t: f64) -> Result<Vec<f64>> {
    kappas
        .iter()
        .map(|&k| delayed_solution(p, lam, k, t))
        .collect()
}

/// Exact solution `psi(t)` of the damped scalar model `v' = v^p - v`,
/// `v(0) = A >= 0`. Every trajectory relaxes to the equilibrium `1`; from
/// `A = 0` this branch leaves zero immediately even though zero is itself an
/// equilibrium — the damped version of the non-uniqueness mechanism.
pub fn psi_relaxation(p: f64, a: f64, t: f64) -> Result<f64> {
    let q = check_p(p)?;
    if !(a >= 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "psi_relaxation needs A >= 0 and t >= 0, got A = {a}, t = {t}"
        )));
    }
    let w = (a.powf(1.0 - p) - 1.0) * (-(1.0 - p) * t).exp() + 1.0;
    Ok(w.max(0.0).powf(q))
}

/// Bihari-type upper envelope for zero data: any sub-solution of
/// `v' <= Lambda v^p`, `v(0) = 0`, stays below
/// `((1-p) Lambda_*(t))^{1/(1-p)}`.
pub fn bihari_envelope(p: f64, lambda_star: f64) -> Result<f64> {
    let q = check_p(p)?;
    if !(lambda_star >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bihari_envelope needs lambda_star >= 0, got {lambda_star}"
        )));
    }
    Ok(((1.0 - p) * lambda_star).powf(q))
}

/// Lower grow-up bound: once a positive fraction `c_eff` of the forcing
/// reaches a point (through the kernel lower bound), the value there is at
/// least `((1-p) c_eff Lambda_*(t))^{1/(1-p)}`.
pub fn growup_lower_bound(p: f64, c_eff: f64, lambda_star: f64) -> Result<f64> {
    check_p(p)?;
    if !(c_eff > 0.0 && c_eff <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "effective constant must lie in (0, 1], got {c_eff}"
        )));
    }
    bihari_envelope(p, c_eff * lambda_star)
}

/// The scaling symmetry linking viscosities: if `u` solves the problem with
/// viscosity one and potential `V`, then
/// `U(x, t) = k^q u(x / sqrt(k), t / k)` (with `q = 1 / (1 - p)`) solves the
/// problem with viscosity `k` and potential `V(x / sqrt(k), t / k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityScaling {
    pub k_visc: f64,
    pub p: f64,
}

impl ViscosityScaling {
    pub fn new(k_visc: f64, p: f64) -> Result<Self> {
        check_p(p)?;
        if !(k_visc > 0.0) || !k_visc.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be positive, got {k_visc}"
            )));
        }
        Ok(ViscosityScaling { k_visc, p })
    }

    pub fn q(&self) -> f64 {
        1.0 / (1.0 - self.p)
    }

    /// Amplitude factor `k^q`.
    pub fn amplitude(&self) -> f64 {
        self.k_visc.powf(self.q())
    }

    /// Map a point of the viscosity-`k` problem to the base problem.
    pub fn base_point(&self, x: f64, t: f64) -> (f64, f64) {
        (x / self.k_visc.sqrt(), t / self.k_visc)
    }

    /// Map a point of the base problem to the viscosity-`k` problem.
    pub fn scaled_point(&self, x: f64, t: f64) -> (f64, f64) {
        (x * self.k_visc.sqrt(), t * self.k_visc)
    }

    /// Value of the rescaled solution given the base solution value at the
    /// corresponding base point.
    pub fn push_value(&self, u_base: f64) -> f64 {
        self.amplitude() * u_base
    }

    /// Inverse of [`push_value`](Self::push_value).
    pub fn pull_value(&self, u_scaled: f64) -> f64 {
        u_scaled / self.amplitude()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite difference of a scalar function.
    fn diff(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn phi_solves_the_scalar_ode() {
        let p = 0.5;
        let lam = TimeLambda::Power {
            coeff: 2.0,
            exponent: 1.0,
        };
        for &t in &[0.3, 1.0, 2.7] {
            let phi = |s: f64| phi_lambda(p, 0.7, lam.integral(s)).unwrap();
            let lhs = diff(phi, t, 1e-5);
            let rhs = lam.eval(t) * phi(t).powf(p);
            assert!(
                (lhs - rhs).abs() < 1e-6 * rhs.abs().max(1.0),
                "phi' mismatch at t = {t}: {lhs} vs {rhs}"
            );
        }
        // Closed form for Lambda = 1, c = 0, p = 1/2: (t/2)^2.
        let c = TimeLambda::Constant { value: 1.0 };
        let v = phi_lambda(0.5, 0.0, c.integral(3.0)).unwrap();
        assert!((v - 2.25).abs() < 1e-14);
    }

    #[test]
    fn delayed_solutions_ignite_and_solve() {
        let p = 0.5;
        let lam = TimeLambda::Constant { value: 1.0 };
        // u_kappa(t) = ((t - kappa)_+ / 2)^2.
        for &(kappa, t) in &[(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (5.0, 1.0)] {
            let got = delayed_solution(p, &lam, kappa, t).unwrap();
            let expect = ((t - kappa).max(0.0) / 2.0).powi(2);
            assert!((got - expect).abs() < 1e-14, "kappa = {kappa}, t = {t}");
        }
        // The family is ordered: earlier ignition dominates.
        let fam = delayed_family(p, &lam, &[0.0, 0.5, 1.0, 2.0], 3.0).unwrap();
        assert!(fam.windows(2).all(|w| w[0] > w[1]));
        // Each member solves v' = Lambda v^p away from the ignition time.
        let kappa = 0.7;
        for &t in &[1.0, 2.0, 4.0] {
            let u = |s: f64| delayed_solution(p, &lam, kappa, s).unwrap();
            let lhs = diff(u, t, 1e-6);
            let rhs = lam.eval(t) * u(t).powf(p);
            assert!((lhs - rhs).abs() < 1e-5 * rhs.max(1.0));
        }
    }

    #[test]
    fn psi_relaxes_to_equilibrium() {
        let p = 0.5;
        for &a in &[0.0, 0.3, 1.0, 4.0] {
            // Solves v' = v^p - v.
            for &t in &[0.2, 1.0, 3.0] {
                let f = |s: f64| psi_relaxation(p, a, s).unwrap();
                let lhs = diff(f, t, 1e-6);
                let v = f(t);
                let rhs = v.powf(p) - v;
                assert!(
                    (lhs - rhs).abs() < 1e-5,
                    "psi' mismatch for A = {a}, t = {t}"
                );
            }
            // Long-time limit is 1.
            let late = psi_relaxation(p, a, 60.0).unwrap();
            assert!((late - 1.0).abs() < 1e-12, "A = {a} gave {late}");
        }
        // Equilibrium is exact.
        assert_eq!(psi_relaxation(p, 1.0, 5.0).unwrap(), 1.0);
        // From zero data the branch leaves zero immediately.
        assert!(psi_relaxation(p, 0.0, 0.01).unwrap() > 0.0);
    }

    #[test]
    fn envelopes_bracket_the_maximal_solution() {
        let p = 0.4;
        let lam = TimeLambda::Constant { value: 3.0 };
        for &t in &[0.5, 2.0, 10.0] {
            let star = lam.integral(t);
            let zero_data = phi_lambda(p, 0.0, star).unwrap();
            let env = bihari_envelope(p, star).unwrap();
            assert!((zero_data - env).abs() < 1e-12 * env);
            let lower = growup_lower_bound(p, 0.25, star).unwrap();
            assert!(lower < env);
            assert!(lower > 0.0);
        }
    }

    #[test]
    fn viscosity_scaling_round_trip() {
        let s = ViscosityScaling::new(4.0, 0.5).unwrap();
        assert_eq!(s.q(), 2.0);
        assert_eq!(s.amplitude(), 16.0);
        let (x, t) = s.base_point(2.0, 8.0);
        assert_eq!((x, t), (1.0, 2.0));
        assert_eq!(s.scaled_point(x, t), (2.0, 8.0));
        assert_eq!(s.pull_value(s.push_value(0.37)), 0.37);

        // Scalar consistency: for V = 1, constants obey v' = v^p, and
        // w(t) = k^q v(t / k) solves the same ODE; check through Phi.
        let p = 0.5;
        let k = 4.0;
        let sc = ViscosityScaling::new(k, p).unwrap();
        let lam = TimeLambda::Constant { value: 1.0 };
        let c_base = 1.0 / sc.amplitude();
        for &t in &[0.4, 1.0, 6.0] {
            let base = phi_lambda(p, c_base, lam.integral(t / k)).unwrap();
            let direct = phi_lambda(p, 1.0, lam.integral(t)).unwrap();
            assert!(
                (sc.push_value(base) - direct).abs() < 1e-12 * direct,
                "scaling identity fails at t = {t}"
            );
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(phi_lambda(1.0, 1.0, 1.0).is_err());
        assert!(phi_lambda(0.5, -1.0, 1.0).is_err());
        assert!(TimeLambda::Power {
            coeff: 1.0,
            exponent: -1.0
        }
        .validate()
        .is_err());
        assert!(delayed_solution(0.5, &TimeLambda::Constant { value: 1.0 }, -1.0, 1.0).is_err());
        assert!(growup_lower_bound(0.5, 0.0, 1.0).is_err());
        assert!(ViscosityScaling::new(0.0, 0.5).is_err());
    }
}
