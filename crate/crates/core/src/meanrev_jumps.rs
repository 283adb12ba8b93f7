//! Vasicek process with compound Poisson Gaussian jumps, one upward stream
//! and an optional downward stream:
//!
//! ```text
//! dx = alpha (theta - x) dt + sigma dW + dJ_up - dJ_dn
//! ```
//!
//! Up-jump sizes are `N(mu_up, sigma_up^2)` at rate `lambda_up`; down-jump
//! sizes are `N(mu_dn, sigma_dn^2)` at rate `lambda_dn` and are subtracted, so
//! a positive `mu_dn` is a downward move.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::meanrev::{ar1_ols, params_from_ar1, vasicek_log_likelihood, VasicekParams};
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::quad::integrate;
use crate::rng::RngStream;
use crate::sim::{check_grid, state_paths};
use crate::stats;
use crate::types::{CalibrationResult, PathSet, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpVasicekParams {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: f64,
    pub lambda_up: f64,
    pub mu_up: f64,
    pub sigma_up: f64,
    pub lambda_dn: f64,
    pub mu_dn: f64,
    pub sigma_dn: f64,
}

impl JumpVasicekParams {
    /// Single upward stream; the downward stream is switched off.
    pub fn single(alpha: f64, theta: f64, sigma: f64, lambda: f64, mu: f64, sigma_j: f64) -> Result<Self> {
        let p = Self {
            alpha,
            theta,
            sigma,
            lambda_up: lambda,
            mu_up: mu,
            sigma_up: sigma_j,
            lambda_dn: 0.0,
            mu_dn: 0.0,
            sigma_dn: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha,
            self.theta,
            self.sigma,
            self.lambda_up,
            self.mu_up,
            self.sigma_up,
            self.lambda_dn,
            self.mu_dn,
            self.sigma_dn,
        ];
        ensure_param(all.iter().all(|v| v.is_finite()), || "parameters must be finite".into())?;
        ensure_param(self.alpha > 0.0 && self.sigma > 0.0, || {
            format!("alpha and sigma must be positive, got {} and {}", self.alpha, self.sigma)
        })?;
        ensure_param(
            self.lambda_up >= 0.0 && self.lambda_dn >= 0.0 && self.sigma_up >= 0.0 && self.sigma_dn >= 0.0,
            || "jump intensities and jump volatilities must be >= 0".into(),
        )
    }

    pub fn diffusion(&self) -> VasicekParams {
        VasicekParams {
            alpha: self.alpha,
            theta: self.theta,
            sigma: self.sigma,
        }
    }

    /// Net mean jump rate `lambda_up mu_up - lambda_dn mu_dn`.
    fn jump_drift(&self) -> f64 {
        self.lambda_up * self.mu_up - self.lambda_dn * self.mu_dn
    }

    fn jump_second_moment_rate(&self) -> f64 {
        self.lambda_up * (self.mu_up * self.mu_up + self.sigma_up * self.sigma_up)
            + self.lambda_dn * (self.mu_dn * self.mu_dn + self.sigma_dn * self.sigma_dn)
    }

    /// Long-run mean `theta + (lambda_up mu_up - lambda_dn mu_dn) / alpha`.
    pub fn long_run_mean(&self) -> f64 {
        self.theta + self.jump_drift() / self.alpha
    }

    /// Exact conditional mean of `x(t)` given `x(0) = x0`.
    pub fn mean(&self, x0: f64, t: f64) -> f64 {
        let m = self.long_run_mean();
        m + (x0 - m) * (-self.alpha * t).exp()
    }

    /// Exact conditional variance of `x(t)`:
    /// `(sigma^2 + sum lambda E[J^2]) (1 - e^{-2 alpha t}) / (2 alpha)`.
    pub fn variance(&self, t: f64) -> f64 {
        (self.sigma * self.sigma + self.jump_second_moment_rate()) * -(-2.0 * self.alpha * t).exp_m1()
            / (2.0 * self.alpha)
    }
}

/// Jumps arriving uniformly inside the step, each damped by
/// `e^{-alpha (time to step end)}`.
fn damped_jumps(lambda: f64, mu: f64, sd: f64, alpha: f64, dt: f64, r: &mut RngStream) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let n = r.poisson(lambda * dt);
    (0..n)
        .map(|_| {
            let lag = dt * r.uniform();
            (mu + sd * r.normal()) * (-alpha * lag).exp()
        })
        .sum()
}

fn step(p: &JumpVasicekParams, c: f64, b: f64, delta: f64, dt: f64, x: f64, r: &mut RngStream) -> f64 {
    let diff = c + b * x + delta * r.normal();
    let up = damped_jumps(p.lambda_up, p.mu_up, p.sigma_up, p.alpha, dt, r);
    let dn = damped_jumps(p.lambda_dn, p.mu_dn, p.sigma_dn, p.alpha, dt, r);
    diff + up - dn
}

/// Exact Ornstein–Uhlenbeck step plus the Poisson number of jumps in each
/// stream, each jump placed at a uniform arrival time within the step.
pub fn simulate(
    params: &JumpVasicekParams,
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(x0.is_finite(), || "x0 must be finite".into())?;
    let a = params.diffusion().ar1(dt);
    let p = *params;
    Ok(state_paths(x0, n_steps, n_paths, dt, rng, Scheme::Exact, |r, x, _| {
        step(&p, a.c, a.b, a.delta, dt, x, r)
    }))
}

/// [`simulate`] for `y = ln x`, returning `x = e^y`.
pub fn simulate_exponential(
    params: &JumpVasicekParams,
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    if !(x0 > 0.0) {
        return Err(Error::NonPositiveLevel { index: 0, value: x0 });
    }
    let mut ps = simulate(params, x0.ln(), n_steps, n_paths, dt, rng)?;
    for v in ps.values.iter_mut() {
        *v = v.exp();
    }
    Ok(ps)
}

fn check_intensity(p: &JumpVasicekParams, dt: f64) -> Result<()> {
    let w = (p.lambda_up + p.lambda_dn) * dt;
    if w >= 1.0 {
        return Err(Error::IntensityTooLarge(w));
    }
    Ok(())
}

fn ln_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((2.0 * PI * v).ln() + (x - m) * (x - m) / v)
}

fn ln_pdf_unchecked(x_next: f64, x_prev: f64, p: &JumpVasicekParams, dt: f64) -> f64 {
    let a = p.diffusion().ar1(dt);
    let m = a.c + a.b * x_prev;
    let v = a.delta * a.delta;
    let w_up = p.lambda_up * dt;
    let w_dn = p.lambda_dn * dt;
    let mut terms = [f64::NEG_INFINITY; 3];
    terms[0] = (1.0 - w_up - w_dn).ln() + ln_normal(x_next, m, v);
    if w_up > 0.0 {
        terms[1] = w_up.ln() + ln_normal(x_next, m + p.mu_up, v + p.sigma_up * p.sigma_up);
    }
    if w_dn > 0.0 {
        terms[2] = w_dn.ln() + ln_normal(x_next, m - p.mu_dn, v + p.sigma_dn * p.sigma_dn);
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Log of [`transition_pdf`].
pub fn transition_ln_pdf(x_next: f64, x_prev: f64, params: &JumpVasicekParams, dt: f64) -> Result<f64> {
    params.validate()?;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    check_intensity(params, dt)?;
    Ok(ln_pdf_unchecked(x_next, x_prev, params, dt))
}

/// Small-step transition density with at most one jump per step: a mixture
/// of the Vasicek Gaussian and the Gaussian shifted by one up or one down
/// jump, weighted `1 - (lambda_up + lambda_dn) dt`, `lambda_up dt`, `lambda_dn dt`.
pub fn transition_pdf(x_next: f64, x_prev: f64, params: &JumpVasicekParams, dt: f64) -> Result<f64> {
    transition_ln_pdf(x_next, x_prev, params, dt).map(f64::exp)
}

pub fn log_likelihood(params: &JumpVasicekParams, x: &[f64], dt: f64) -> f64 {
    if params.validate().is_err() || check_intensity(params, dt).is_err() {
        return f64::NEG_INFINITY;
    }
    x.windows(2).map(|w| ln_pdf_unchecked(w[1], w[0], params, dt)).sum()
}

/// Transition moment generating function
/// `exp(m u + v u^2 / 2 + int_0^dt sum_k lambda_k (M_k(u e^{-alpha s}) - 1) ds)`,
/// with the jump integral computed by adaptive quadrature.
pub fn transition_mgf(u: f64, x_prev: f64, params: &JumpVasicekParams, dt: f64) -> Result<f64> {
    params.validate()?;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    let a = params.diffusion().ar1(dt);
    let m = a.c + a.b * x_prev;
    let v = a.delta * a.delta;
    let p = params;
    let mgf_n = |mu: f64, sd: f64, s: f64| (mu * s + 0.5 * sd * sd * s * s).exp();
    let f = |s: f64| {
        let w = u * (-p.alpha * s).exp();
        p.lambda_up * (mgf_n(p.mu_up, p.sigma_up, w) - 1.0) + p.lambda_dn * (mgf_n(-p.mu_dn, p.sigma_dn, w) - 1.0)
    };
    let jump = if u == 0.0 || (p.lambda_up == 0.0 && p.lambda_dn == 0.0) {
        0.0
    } else {
        integrate(&f, 0.0, dt, 1e-15, 1e-12)?.value
    };
    Ok((m * u + 0.5 * v * u * u + jump).exp())
}

fn softmax3(a: f64, b: f64) -> (f64, f64) {
    let top = a.max(b).max(0.0);
    let (e0, ea, eb) = ((-top).exp(), (a - top).exp(), (b - top).exp());
    let s = e0 + ea + eb;
    (ea / s, eb / s)
}

struct Coords {
    dt: f64,
    scale: f64,
    level: f64,
    double: bool,
}

impl Coords {
    // u = (ln alpha, (theta - level) / scale, ln(sigma sqrt dt / scale),
    //      w_up, mu_up / scale, ln(sigma_up / scale) [, w_dn, mu_dn / scale, ln(sigma_dn / scale)])
    // where the per-step jump probabilities come from a softmax of (0, w_up, w_dn).
    fn to_params(&self, u: &[f64]) -> JumpVasicekParams {
        let (pu, pd) = if self.double {
            softmax3(u[3], u[6])
        } else {
            let (a, _) = softmax3(u[3], f64::NEG_INFINITY);
            (a, 0.0)
        };
        let (mu_dn, sigma_dn) = if self.double {
            (u[7] * self.scale, u[8].exp() * self.scale)
        } else {
            (0.0, 0.0)
        };
        JumpVasicekParams {
            alpha: u[0].exp(),
            theta: self.level + u[1] * self.scale,
            sigma: u[2].exp() * self.scale / self.dt.sqrt(),
            lambda_up: pu / self.dt,
            mu_up: u[4] * self.scale,
            sigma_up: u[5].exp() * self.scale,
            lambda_dn: pd / self.dt,
            mu_dn,
            sigma_dn,
        }
    }

    fn to_coords(&self, p: &JumpVasicekParams) -> Vec<f64> {
        let p0 = 1.0 - (p.lambda_up + p.lambda_dn) * self.dt;
        let logit = |w: f64| (w.max(1e-300) / p0).ln();
        let mut u = vec![
            p.alpha.ln(),
            (p.theta - self.level) / self.scale,
            (p.sigma * self.dt.sqrt() / self.scale).ln(),
            logit(p.lambda_up * self.dt),
            p.mu_up / self.scale,
            (p.sigma_up / self.scale).max(1e-6).ln(),
        ];
        if self.double {
            u.extend([
                logit(p.lambda_dn * self.dt),
                p.mu_dn / self.scale,
                (p.sigma_dn / self.scale).max(1e-6).ln(),
            ]);
        }
        u
    }
}

fn mean_sd(v: &[f64], fallback_mean: f64, fallback_sd: f64) -> (f64, f64) {
    match v.len() {
        0 => (fallback_mean, fallback_sd),
        1 => (v[0], fallback_sd),
        _ => (stats::mean(v), stats::variance(v, false).sqrt().max(0.1 * fallback_sd)),
    }
}

/// Maximum likelihood over the small-step mixture density. The diffusion part
/// starts from the least-squares AR(1) fit; jump intensities, means and
/// volatilities start from the residuals beyond three residual standard
/// deviations. A second start with negligible intensity nests the plain
/// Vasicek fit. With `double_jumps = false` the downward stream is fixed at zero.
pub fn calibrate(x: &[f64], dt: f64, double_jumps: bool) -> Result<CalibrationResult<JumpVasicekParams>> {
    if x.len() < 200 {
        return Err(Error::InvalidSeries(format!("jump-Vasicek calibration needs at least 200 observations, got {}", x.len())));
    }
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    let ar = ar1_ols(x)?;
    let base = params_from_ar1(ar, dt)?;
    let resid: Vec<f64> = x.windows(2).map(|w| w[1] - ar.c - ar.b * w[0]).collect();
    let d = ar.delta;
    if !(d > 0.0) {
        return Err(Error::DegenerateSeries("AR(1) residuals are all zero".into()));
    }
    let big: Vec<f64> = resid.iter().cloned().filter(|r| r.abs() > 3.0 * d).collect();
    let ups: Vec<f64> = big.iter().cloned().filter(|r| *r > 0.0).collect();
    let dns: Vec<f64> = big.iter().filter(|r| **r < 0.0).map(|r| -r).collect();
    let n = resid.len() as f64;
    let rate = |k: usize| (k.max(1) as f64 / n).min(0.2) / dt;
    let guess = if double_jumps {
        let (mu_up, sd_up) = mean_sd(&ups, 4.0 * d, 0.5 * d);
        let (mu_dn, sd_dn) = mean_sd(&dns, 4.0 * d, 0.5 * d);
        JumpVasicekParams {
            lambda_up: rate(ups.len()),
            mu_up,
            sigma_up: sd_up,
            lambda_dn: rate(dns.len()),
            mu_dn,
            sigma_dn: sd_dn,
            ..JumpVasicekParams::single(base.alpha, base.theta, base.sigma, 0.0, 0.0, 0.0)?
        }
    } else {
        let (mu, sd) = mean_sd(&big, 4.0 * d, 0.5 * d);
        JumpVasicekParams::single(base.alpha, base.theta, base.sigma, rate(big.len()), mu, sd)?
    };
    let coords = Coords {
        dt,
        scale: d,
        level: base.theta,
        double: double_jumps,
    };
    let mut nested = coords.to_coords(&guess);
    nested[3] = -25.0;
    if double_jumps {
        nested[6] = -25.0;
    }
    let starts = vec![coords.to_coords(&guess), nested];
    let ll = |u: &[f64]| log_likelihood(&coords.to_params(u), x, dt);
    let opts = NelderMeadOptions {
        step: 0.3,
        max_evals: 40_000,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &starts, &opts)?;
    let params = coords.to_params(&best.x);
    let mut at = vec![
        params.alpha,
        params.theta,
        params.sigma,
        params.lambda_up,
        params.mu_up,
        params.sigma_up,
    ];
    if double_jumps {
        at.extend([params.lambda_dn, params.mu_dn, params.sigma_dn]);
    }
    let stderr = observed_info_stderr(
        |v: &[f64]| {
            let mut q = JumpVasicekParams {
                alpha: v[0],
                theta: v[1],
                sigma: v[2],
                lambda_up: v[3],
                mu_up: v[4],
                sigma_up: v[5],
                ..params
            };
            if double_jumps {
                q.lambda_dn = v[6];
                q.mu_dn = v[7];
                q.sigma_dn = v[8];
            }
            -log_likelihood(&q, x, dt)
        },
        &at,
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

/// Log-likelihood of the plain Vasicek model at the diffusion part of `params`.
pub fn diffusion_log_likelihood(params: &JumpVasicekParams, x: &[f64], dt: f64) -> f64 {
    vasicek_log_likelihood(&params.diffusion(), x, dt)
}
