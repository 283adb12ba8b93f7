use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::rng::{gamma_dist, RngStream};
use crate::sim::{check_grid, state_paths};
use crate::specfun::{ln_bessel_i_scaled, noncentral_chi2_cdf};
use crate::stats;
use crate::types::{CalibrationResult, PathSet, Scheme};

use super::vasicek::ar1_ols;

/// `dx = alpha (theta - x) dt + sigma sqrt(x) dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: f64,
}

/// Constants of the one-step transition law over `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirTransition {
    /// `2 alpha / (sigma^2 (1 - e^{-alpha dt}))`.
    pub c: f64,
    /// `2 alpha theta / sigma^2 - 1`.
    pub q: f64,
    pub decay: f64,
}

impl CirTransition {
    /// Degrees of freedom of the scaled noncentral chi-squared law, `2q + 2`.
    pub fn dof(&self) -> f64 {
        2.0 * self.q + 2.0
    }

    /// Noncentrality `2 c x_prev e^{-alpha dt}`.
    pub fn noncentrality(&self, x_prev: f64) -> f64 {
        2.0 * self.c * x_prev * self.decay
    }
}

impl CirParams {
    pub fn new(alpha: f64, theta: f64, sigma: f64) -> Result<Self> {
        let p = Self { alpha, theta, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.alpha, self.theta, self.sigma]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        ensure_param(ok, || {
            format!(
                "alpha, theta and sigma must be positive, got {}, {}, {}",
                self.alpha, self.theta, self.sigma
            )
        })
    }

    /// `sigma^2 <= 2 alpha theta`: the origin is inaccessible.
    pub fn feller_satisfied(&self) -> bool {
        self.sigma * self.sigma <= 2.0 * self.alpha * self.theta
    }

    pub fn transition(&self, dt: f64) -> CirTransition {
        let s2 = self.sigma * self.sigma;
        CirTransition {
            c: 2.0 * self.alpha / (s2 * -(-self.alpha * dt).exp_m1()),
            q: 2.0 * self.alpha * self.theta / s2 - 1.0,
            decay: (-self.alpha * dt).exp(),
        }
    }

    /// Conditional mean of `x(t)` given `x(0) = x0`.
    pub fn mean(&self, x0: f64, t: f64) -> f64 {
        self.theta + (x0 - self.theta) * (-self.alpha * t).exp()
    }

    /// Conditional variance of `x(t)` given `x(0) = x0`.
    pub fn variance(&self, x0: f64, t: f64) -> f64 {
        let e = (-self.alpha * t).exp();
        let one_m = -(-self.alpha * t).exp_m1();
        let s2a = self.sigma * self.sigma / self.alpha;
        x0 * s2a * e * one_m + self.theta * s2a * 0.5 * one_m * one_m
    }
}

fn check_dt(dt: f64) -> Result<()> {
    ensure_param(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))
}

fn ln_pdf_unchecked(x_next: f64, x_prev: f64, t: &CirTransition) -> f64 {
    if !(x_next > 0.0) {
        return f64::NEG_INFINITY;
    }
    let u = t.c * x_prev * t.decay;
    let v = t.c * x_next;
    let z = 2.0 * (u * v).sqrt();
    let ln_i = match ln_bessel_i_scaled(t.q, z) {
        Ok(l) => l,
        Err(_) => return f64::NEG_INFINITY,
    };
    let d = u.sqrt() - v.sqrt();
    t.c.ln() - d * d + 0.5 * t.q * (v / u).ln() + ln_i
}

/// Log of [`cir_transition_pdf`].
pub fn cir_transition_ln_pdf(x_next: f64, x_prev: f64, params: &CirParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    ensure_param(x_prev > 0.0, || format!("x_prev must be positive, got {x_prev}"))?;
    ensure_param(x_next > 0.0, || format!("x_next must be positive, got {x_next}"))?;
    Ok(ln_pdf_unchecked(x_next, x_prev, &params.transition(dt)))
}

/// Exact transition density
/// `c e^{-u-v} (v/u)^{q/2} I_q(2 sqrt(uv))` with `u = c x_prev e^{-alpha dt}`
/// and `v = c x_next`, evaluated in log space with a scaled Bessel function.
pub fn cir_transition_pdf(x_next: f64, x_prev: f64, params: &CirParams, dt: f64) -> Result<f64> {
    cir_transition_ln_pdf(x_next, x_prev, params, dt).map(f64::exp)
}

/// Transition distribution function through the noncentral chi-squared law.
pub fn cir_transition_cdf(x_next: f64, x_prev: f64, params: &CirParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    if x_next <= 0.0 {
        return Ok(0.0);
    }
    let t = params.transition(dt);
    noncentral_chi2_cdf(2.0 * t.c * x_next, t.dof(), t.noncentrality(x_prev))
}

/// Draws `x_next` as `chi2'(2q + 2, 2u) / (2c)`: a Poisson(u) count `N`, then
/// a Gamma(q + 1 + N, scale 2) variate.
pub(crate) fn draw_exact(x_prev: f64, t: &CirTransition, r: &mut RngStream) -> f64 {
    let n = r.poisson(0.5 * t.noncentrality(x_prev));
    let shape = 0.5 * t.dof() + n as f64;
    // Shape and scale are positive for valid parameters.
    let g = gamma_dist(shape, 2.0).expect("positive gamma shape");
    r.gamma_one(&g) / (2.0 * t.c)
}

/// `Exact` samples the noncentral chi-squared transition; `Euler` uses
/// `x + alpha (theta - x) dt + sigma sqrt(max(x, 0) dt) Z` and requires
/// `alpha dt < 1`.
pub fn cir_simulate(
    params: &CirParams,
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
    scheme: Scheme,
) -> Result<PathSet> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(x0 > 0.0 && x0.is_finite(), || format!("x0 must be positive, got {x0}"))?;
    let p = *params;
    match scheme {
        Scheme::Exact => {
            let t = p.transition(dt);
            Ok(state_paths(x0, n_steps, n_paths, dt, rng, scheme, |r, x, _| draw_exact(x, &t, r)))
        }
        Scheme::Euler => {
            ensure_param(p.alpha * dt < 1.0, || format!("Euler scheme needs alpha dt < 1, got {}", p.alpha * dt))?;
            let sq = dt.sqrt();
            Ok(state_paths(x0, n_steps, n_paths, dt, rng, scheme, |r, x, _| {
                x + p.alpha * (p.theta - x) * dt + p.sigma * x.max(0.0).sqrt() * sq * r.normal()
            }))
        }
    }
}

pub fn cir_log_likelihood(params: &CirParams, x: &[f64], dt: f64) -> f64 {
    if params.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    let t = params.transition(dt);
    x.windows(2).map(|w| ln_pdf_unchecked(w[1], w[0], &t)).sum()
}

fn check_levels(x: &[f64]) -> Result<()> {
    match x.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((index, &value)) => Err(Error::NonPositiveLevel { index, value }),
        None => Ok(()),
    }
}

/// Moment-based start: `alpha = -ln b / dt` from the AR(1) slope,
/// `theta` the sample mean, `sigma = sqrt(2 alpha V / theta)` with `V` the
/// sample variance.
pub fn cir_initial_guess(x: &[f64], dt: f64) -> Result<CirParams> {
    check_levels(x)?;
    check_dt(dt)?;
    let b = ar1_ols(x)?.b;
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::NonStationaryEstimate { b });
    }
    let alpha = -b.ln() / dt;
    let theta = stats::mean(x);
    let var = stats::variance(x, false);
    CirParams::new(alpha, theta, (2.0 * alpha * var / theta).sqrt())
}

/// Maximum likelihood with the exact transition density over
/// `(ln alpha, ln theta, ln sigma)`.
pub fn cir_calibrate(x: &[f64], dt: f64) -> Result<CalibrationResult<CirParams>> {
    check_levels(x)?;
    if x.len() < 50 {
        return Err(Error::InvalidSeries(format!("CIR calibration needs at least 50 observations, got {}", x.len())));
    }
    let guess = cir_initial_guess(x, dt)?;
    let to_params = |u: &[f64]| CirParams {
        alpha: u[0].exp(),
        theta: u[1].exp(),
        sigma: u[2].exp(),
    };
    let start = vec![guess.alpha.ln(), guess.theta.ln(), guess.sigma.ln()];
    let ll = |u: &[f64]| cir_log_likelihood(&to_params(u), x, dt);
    let opts = NelderMeadOptions {
        step: 0.2,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &[start], &opts)?;
    let params = to_params(&best.x);
    let stderr = observed_info_stderr(
        |v: &[f64]| {
            -cir_log_likelihood(
                &CirParams {
                    alpha: v[0],
                    theta: v[1],
                    sigma: v[2],
                },
                x,
                dt,
            )
        },
        &[params.alpha, params.theta, params.sigma],
    );
    Ok(CalibrationResult {
        params,
        log_likelihood: -best.value,
        initial_guess: guess,
        initial_log_likelihood: initial_ll,
        iterations: best.iterations,
        converged: best.converged,
        stderr_estimates: stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feller_flag() {
        assert!(CirParams::new(1.2902, 51.7894, 4.4966).unwrap().feller_satisfied());
        assert!(!CirParams::new(0.1, 0.01, 1.0).unwrap().feller_satisfied());
    }

    #[test]
    fn noise_free_euler_is_linear_recursion() {
        let p = CirParams::new(2.0, 5.0, 1e-300).unwrap();
        let dt = 0.01;
        let ps = cir_simulate(&p, 1.0, 50, 1, dt, &RngStream::new(0, 0), Scheme::Euler).unwrap();
        let mut x = 1.0;
        for &v in &ps.path(0)[1..] {
            x = p.alpha * p.theta * dt + (1.0 - p.alpha * dt) * x;
            assert!((v - x).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_needs_small_step() {
        let p = CirParams::new(2.0, 5.0, 1.0).unwrap();
        assert!(cir_simulate(&p, 1.0, 5, 1, 1.0, &RngStream::new(0, 0), Scheme::Euler).is_err());
    }

    #[test]
    fn initial_guess_formula() {
        let x: Vec<f64> = (0..200).map(|i| 50.0 + 10.0 * (i as f64 * 0.3).sin()).collect();
        let g = cir_initial_guess(&x, 1.0 / 52.0).unwrap();
        let v = stats::variance(&x, false);
        assert!((g.theta - stats::mean(&x)).abs() < 1e-12);
        assert!((g.sigma - (2.0 * g.alpha * v / g.theta).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn non_positive_rejected() {
        let mut x = vec![1.0; 60];
        x[7] = 0.0;
        assert!(matches!(cir_calibrate(&x, 1.0), Err(Error::NonPositiveLevel { index: 7, .. })));
    }
}
