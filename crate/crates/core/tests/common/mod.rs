//! Independent numerical oracles for the integration suites.
//!
//! Nothing here calls back into the library's special-function or solver
//! code: the kernel oracle integrates the heat-semigroup subordination
//! formula with composite Simpson quadrature, and the ODE oracle is a plain
//! fixed-step RK4. Agreement between these and the library is therefore a
//! genuine cross-check, not a tautology.

#![allow(dead_code)]

/// Composite Simpson rule with `2 m + 1` nodes.
fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + j as f64 * h);
    }
    sum * h / 3.0
}

/// `Gamma(x)` for `x > 0` via `Gamma(x) = 2 int_0^inf u^{2x-1} e^{-u^2} du`.
fn gamma_quadrature(x: f64) -> f64 {
    // The integrand peaks near u = sqrt(x - 1/2); u = 9 + x covers the tail
    // for the moderate orders used in tests.
    2.0 * simpson(
        |u| u.powf(2.0 * x - 1.0) * (-u * u).exp(),
        1e-12,
        9.0 + x,
        100_000,
    )
}

/// Kernel of `(I - Laplacian)^{-nu}` in dimension `n` at radius `r`, by
/// subordination to the heat kernel:
/// `B(r) = 2 (4 pi)^{-n/2} / Gamma(nu) * int_0^inf u^{2 nu - n - 1}
/// e^{-u^2 - r^2 / (4 u^2)} du`.
///
/// `r = 0` needs `2 nu > n` (otherwise the kernel is singular there).
pub fn kernel_oracle(n: u32, nu: f64, r: f64) -> f64 {
    let nf = n as f64;
    let prefactor = 2.0 * (4.0 * std::f64::consts::PI).powf(-nf / 2.0) / gamma_quadrature(nu);
    let a = 2.0 * nu - nf;
    let integral = if r == 0.0 {
        assert!(a > 0.0, "kernel oracle at r = 0 needs 2 nu > n");
        // substitute s = u^a: int u^{a-1} e^{-u^2} du = (1/a) int e^{-s^{2/a}} ds
        let hi = 60f64.powf(a / 2.0) + 10.0;
        simpson(|s| (-s.powf(2.0 / a)).exp(), 0.0, hi, 100_000) / a
    } else {
        // e^{-r^2/4u^2} kills the integrand below u ~ r/60; the Gaussian
        // factor kills it above max(7.5, 3 sqrt(r)).
        let lo = (r / 60.0).max(1e-12);
        let hi = 7.5f64.max(3.0 * r.sqrt());
        simpson(
            |u| u.powf(a - 1.0) * (-u * u - r * r / (4.0 * u * u)).exp(),
            lo,
            hi,
            100_000,
        )
    };
    prefactor * integral
}

/// Classic fixed-step RK4 for `y' = f(t, y)` from `t0` to `t1` in `n` steps.
pub fn rk4<F: Fn(f64, f64) -> f64>(f: F, y0: f64, t0: f64, t1: f64, n: usize) -> f64 {
    let h = (t1 - t0) / n as f64;
    let mut t = t0;
    let mut y = y0;
    for _ in 0..n {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    y
}

/// Oracle for the spatially flat forced problem `phi' = lambda(t) phi^p`,
/// `phi(0) = phi0 >= 0`.
pub fn forced_ode_oracle<L: Fn(f64) -> f64>(lambda: L, p: f64, phi0: f64, t: f64, n: usize) -> f64 {
    rk4(|s, y| lambda(s) * y.max(0.0).powf(p), phi0, 0.0, t, n)
}

/// Oracle for the relaxation problem `psi' = psi^p - psi`, `psi(0) = a`.
pub fn relaxation_ode_oracle(p: f64, a: f64, t: f64, n: usize) -> f64 {
    rk4(|_, y| y.max(0.0).powf(p) - y, a, 0.0, t, n)
}
