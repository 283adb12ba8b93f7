//! Normal Inverse Gaussian: Brownian motion with drift on an inverse
//! Gaussian clock. Over a step `dt` the scale and location become
//! `delta dt` and `mu dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::quad::integrate_to_inf;
use crate::rng::RngStream;
use crate::sim::{check_grid, log_level_paths};
use crate::specfun::ln_bessel_k_scaled;
use crate::types::{CalibrationResult, LogReturns, PathSet, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub mu: f64,
}

impl NigParams {
    pub fn new(alpha: f64, beta: f64, delta: f64, mu: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            delta,
            mu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.alpha.is_finite() && self.alpha > self.beta.abs(), || {
            format!("need alpha > |beta|, got alpha={} beta={}", self.alpha, self.beta)
        })?;
        ensure_param(self.delta > 0.0 && self.delta.is_finite(), || {
            format!("delta must be positive, got {}", self.delta)
        })?;
        ensure_param(self.mu.is_finite(), || "mu must be finite".into())
    }

    /// `sqrt(alpha^2 - beta^2)`.
    pub fn gamma0(&self) -> f64 {
        ((self.alpha - self.beta) * (self.alpha + self.beta)).sqrt()
    }
}

fn check_dt(dt: f64) -> Result<()> {
    ensure_param(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))
}

fn ln_density_unchecked(x: f64, p: &NigParams, dt: f64) -> f64 {
    let delta = p.delta * dt;
    let d = x - p.mu * dt;
    let r = delta.hypot(d);
    let z = p.alpha * r;
    let ln_ks = match ln_bessel_k_scaled(1.0, z) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    // delta gamma0 - alpha r, rearranged so the near-Gaussian limit does not cancel.
    let g = p.gamma0();
    let core = -delta * p.beta * p.beta / (p.alpha + g) - p.alpha * d * d / (delta + r);
    (p.alpha * delta / PI).ln() + core + p.beta * d + ln_ks - r.ln()
}

pub fn nig_ln_density(x: f64, params: &NigParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    Ok(ln_density_unchecked(x, params, dt))
}

pub fn nig_density(x: f64, params: &NigParams, dt: f64) -> Result<f64> {
    nig_ln_density(x, params, dt).map(f64::exp)
}

/// Mean, variance, skewness and (non-excess) kurtosis of a `dt`-increment.
pub fn nig_moments(params: &NigParams, dt: f64) -> (f64, f64, f64, f64) {
    let g = params.gamma0();
    let delta = params.delta * dt;
    let (a, b) = (params.alpha, params.beta);
    let mean = params.mu * dt + delta * b / g;
    let var = delta * a * a / g.powi(3);
    let skew = 3.0 * b / (a * (delta * g).sqrt());
    let kurt = 3.0 + 3.0 * (1.0 + 4.0 * (b / a).powi(2)) / (delta * g);
    (mean, var, skew, kurt)
}

/// Parameters whose `dt`-increment has the given mean, variance, skewness and
/// (non-excess) kurtosis. Moment sets outside the NIG range (`3 (K - 3) <= 4 S^2`)
/// fall back to a symmetric law with the same mean and variance.
pub fn nig_from_moments(mean: f64, var: f64, skew: f64, kurt: f64, dt: f64) -> Result<NigParams> {
    ensure_param(var > 0.0, || format!("variance must be positive, got {var}"))?;
    check_dt(dt)?;
    let excess = kurt - 3.0;
    let gap = excess / 3.0 - 4.0 * skew * skew / 9.0;
    let (dg, rho) = if gap > 0.0 && excess.is_finite() {
        let dg = 1.0 / gap;
        let rho2 = skew * skew * dg / 9.0;
        if rho2 < 0.99 {
            (dg, skew.signum() * rho2.sqrt())
        } else {
            (dg, 0.0)
        }
    } else {
        (100.0, 0.0)
    };
    let one_m = 1.0 - rho * rho;
    let alpha = (dg / var).sqrt() / one_m;
    let g = alpha * one_m.sqrt();
    let delta = dg / g;
    let beta = rho * alpha;
    let mu = mean - delta * beta / g;
    NigParams::new(alpha, beta, delta / dt, mu / dt)
}

/// Moment-matched starting point from the sample moments of `x`.
pub fn nig_initial_guess(x: &LogReturns) -> Result<NigParams> {
    let ms = crate::diagnostics::moment_summary(x.values())?;
    if !(ms.variance > 0.0) {
        return Err(Error::DegenerateSeries("log-returns have zero variance".into()));
    }
    nig_from_moments(ms.mean, ms.variance, ms.skewness, ms.excess_kurtosis + 3.0, x.dt())
}

pub fn nig_log_likelihood(params: &NigParams, x: &LogReturns) -> f64 {
    if params.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    x.values().iter().map(|&v| ln_density_unchecked(v, params, x.dt())).sum()
}

struct Coords {
    dt: f64,
    scale: f64,
}

impl Coords {
    // u = (ln alpha, atanh(beta/alpha), ln delta, mu dt / scale)
    fn to_params(&self, u: &[f64]) -> NigParams {
        let alpha = u[0].exp();
        NigParams {
            alpha,
            beta: alpha * u[1].tanh(),
            delta: u[2].exp(),
            mu: u[3] * self.scale / self.dt,
        }
    }

    fn to_coords(&self, p: &NigParams) -> Vec<f64> {
        vec![
            p.alpha.ln(),
            (p.beta / p.alpha).clamp(-0.999_999, 0.999_999).atanh(),
            p.delta.ln(),
            p.mu * self.dt / self.scale,
        ]
    }
}

/// Maximum likelihood over `(ln alpha, atanh(beta/alpha), ln delta, mu)`, which
/// keeps `alpha > |beta|` and `delta > 0`. Starts from the moment match and
/// from a near-Gaussian law with the sample mean and variance.
pub fn nig_calibrate(x: &LogReturns) -> Result<CalibrationResult<NigParams>> {
    if x.len() < 100 {
        return Err(Error::InvalidSeries(format!("NIG calibration needs at least 100 returns, got {}", x.len())));
    }
    let guess = nig_initial_guess(x)?;
    let ms = crate::diagnostics::moment_summary(x.values())?;
    let gaussian = nig_from_moments(ms.mean, ms.variance, 0.0, 3.0 + 1e-9, x.dt())?;
    let coords = Coords {
        dt: x.dt(),
        scale: ms.variance.sqrt(),
    };
    let starts = vec![coords.to_coords(&guess), coords.to_coords(&gaussian)];
    let ll = |u: &[f64]| nig_log_likelihood(&coords.to_params(u), x);
    let opts = NelderMeadOptions {
        step: 0.2,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &starts, &opts)?;
    let params = coords.to_params(&best.x);
    let stderr = observed_info_stderr(
        |v: &[f64]| {
            -nig_log_likelihood(
                &NigParams {
                    alpha: v[0],
                    beta: v[1],
                    delta: v[2],
                    mu: v[3],
                },
                x,
            )
        },
        &[params.alpha, params.beta, params.delta, params.mu],
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

fn draw(p: &NigParams, dt: f64, r: &mut RngStream) -> f64 {
    let delta = p.delta * dt;
    let z = r.inverse_gaussian_one(delta / p.gamma0(), delta * delta);
    p.mu * dt + p.beta * z + z.sqrt() * r.normal()
}

/// Simulates log-levels. Each step draws the clock increment
/// `Z ~ IG(mean delta dt / gamma0, shape (delta dt)^2)` and returns
/// `mu dt + beta Z + sqrt(Z) N`.
pub fn nig_simulate(
    params: &NigParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(s0 > 0.0 && s0.is_finite(), || format!("s0 must be positive, got {s0}"))?;
    let p = *params;
    Ok(log_level_paths(s0, n_steps, n_paths, dt, rng, Scheme::Exact, move |r, _| draw(&p, dt, r)))
}

pub fn nig_increments(params: &NigParams, dt: f64, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    params.validate()?;
    check_dt(dt)?;
    Ok((0..n).map(|_| draw(params, dt, rng)).collect())
}

/// Distribution function of a `dt`-increment by quadrature of the density.
pub fn nig_cdf(x: f64, params: &NigParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    let (mean, _, _, _) = nig_moments(params, dt);
    let f = |y: f64| ln_density_unchecked(y, params, dt).exp();
    if x <= mean {
        let left = integrate_to_inf(&|t: f64| f(-t), -x, 1e-14, 1e-11)?.value;
        Ok(left.clamp(0.0, 1.0))
    } else {
        let right = integrate_to_inf(&f, x, 1e-14, 1e-11)?.value;
        Ok((1.0 - right).clamp(0.0, 1.0))
    }
}
