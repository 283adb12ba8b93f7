//! Geometric Brownian motion with compound Poisson lognormal jumps.
//!
//! One log-return over `dt` is
//! `(mu - sigma^2/2) dt + sigma sqrt(dt) Z + sum_{j=1}^{N} ln Y_j` with
//! `N ~ Poisson(lambda dt)` and `ln Y_j ~ N(mu_y, sigma_y^2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::gbm;
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::rng::RngStream;
use crate::sim::{check_grid, log_level_paths};
use crate::specfun::normal_cdf;
use crate::stats;
use crate::types::{CalibrationResult, LogReturns, PathSet, Scheme};

/// Poisson mass left out of the mixture sum.
const MIXTURE_TAIL: f64 = 1e-12;
const MAX_TERMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpGbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
}

impl JumpGbmParams {
    pub fn new(mu: f64, sigma: f64, lambda: f64, mu_y: f64, sigma_y: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            lambda,
            mu_y,
            sigma_y,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters whose compensated drift `mu + lambda mu_y - sigma^2/2` equals `mu_star`.
    pub fn from_compensated_drift(mu_star: f64, sigma: f64, lambda: f64, mu_y: f64, sigma_y: f64) -> Result<Self> {
        Self::new(mu_star - lambda * mu_y + 0.5 * sigma * sigma, sigma, lambda, mu_y, sigma_y)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.mu, self.sigma, self.lambda, self.mu_y, self.sigma_y]
            .iter()
            .all(|v| v.is_finite());
        ensure_param(all_finite, || "jump-diffusion parameters must be finite".into())?;
        ensure_param(self.sigma >= 0.0 && self.lambda >= 0.0 && self.sigma_y >= 0.0, || {
            format!(
                "sigma, lambda and sigma_y must be >= 0, got {}, {}, {}",
                self.sigma, self.lambda, self.sigma_y
            )
        })
    }

    /// `mu + lambda mu_y - sigma^2 / 2`, the drift of the compensated log-return.
    pub fn compensated_drift(&self) -> f64 {
        self.mu + self.lambda * self.mu_y - 0.5 * self.sigma * self.sigma
    }

    /// Mean and variance of one log-return over `dt`.
    pub fn step_moments(&self, dt: f64) -> (f64, f64) {
        let ld = self.lambda * dt;
        (
            (self.mu - 0.5 * self.sigma * self.sigma + self.lambda * self.mu_y) * dt,
            self.sigma * self.sigma * dt + ld * (self.mu_y * self.mu_y + self.sigma_y * self.sigma_y),
        )
    }

    /// Mean and variance of the Gaussian mixture component with `j` jumps.
    pub fn component(&self, j: usize, dt: f64) -> (f64, f64) {
        let j = j as f64;
        (
            (self.mu - 0.5 * self.sigma * self.sigma) * dt + j * self.mu_y,
            self.sigma * self.sigma * dt + j * self.sigma_y * self.sigma_y,
        )
    }
}

/// `(j, ln P(N = j))` for the retained Poisson terms.
fn poisson_terms(mean: f64) -> Vec<(usize, f64)> {
    if mean <= 0.0 {
        return vec![(0, 0.0)];
    }
    let ln_mean = mean.ln();
    let mut out = Vec::new();
    let mut ln_w = -mean;
    let mut cum = 0.0;
    for j in 0..MAX_TERMS {
        if j > 0 {
            ln_w += ln_mean - (j as f64).ln();
        }
        out.push((j, ln_w));
        cum += ln_w.exp();
        if cum >= 1.0 - MIXTURE_TAIL && j as f64 >= mean {
            break;
        }
    }
    out
}

fn ln_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((2.0 * PI * v).ln() + (x - m) * (x - m) / v)
}

fn ln_mixture(x: f64, p: &JumpGbmParams, dt: f64, terms: &[(usize, f64)]) -> f64 {
    let lns: Vec<f64> = terms
        .iter()
        .map(|&(j, ln_w)| {
            let (m, v) = p.component(j, dt);
            if v > 0.0 {
                ln_w + ln_normal(x, m, v)
            } else if x == m {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = lns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + lns.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}

/// Log of [`mixture_density`].
pub fn mixture_ln_density(x: f64, params: &JumpGbmParams, dt: f64) -> Result<f64> {
    params.validate()?;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    Ok(ln_mixture(x, params, dt, &poisson_terms(params.lambda * dt)))
}

/// Density of one log-return: the Poisson-weighted Gaussian mixture, summed
/// until the retained Poisson mass reaches `1 - 1e-12` (at most 200 terms).
pub fn mixture_density(x: f64, params: &JumpGbmParams, dt: f64) -> Result<f64> {
    mixture_ln_density(x, params, dt).map(f64::exp)
}

/// Distribution function of one log-return, using the same truncation.
pub fn mixture_cdf(x: f64, params: &JumpGbmParams, dt: f64) -> Result<f64> {
    params.validate()?;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    Ok(poisson_terms(params.lambda * dt)
        .iter()
        .map(|&(j, ln_w)| {
            let (m, v) = params.component(j, dt);
            let f = if v > 0.0 {
                normal_cdf((x - m) / v.sqrt())
            } else if x >= m {
                1.0
            } else {
                0.0
            };
            ln_w.exp() * f
        })
        .sum())
}

pub fn log_likelihood(params: &JumpGbmParams, x: &LogReturns) -> f64 {
    if params.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    let terms = poisson_terms(params.lambda * x.dt());
    x.values().iter().map(|&v| ln_mixture(v, params, x.dt(), &terms)).sum()
}

/// One step: the diffusion draw, then (only when `lambda > 0`) the jump count
/// and the jump sizes. Returns `(log-return, jump count, jump sum)`.
fn draw(p: &JumpGbmParams, dt: f64, r: &mut RngStream) -> (f64, u64, f64) {
    let diff = (p.mu - 0.5 * p.sigma * p.sigma) * dt + p.sigma * dt.sqrt() * r.normal();
    if p.lambda == 0.0 {
        return (diff, 0, 0.0);
    }
    let n = r.poisson(p.lambda * dt);
    let jumps: f64 = (0..n).map(|_| p.mu_y + p.sigma_y * r.normal()).sum();
    (diff + jumps, n, jumps)
}

/// Simulates levels from cumulated log-returns.
pub fn simulate(
    params: &JumpGbmParams,
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
    Ok(log_level_paths(s0, n_steps, n_paths, dt, rng, Scheme::Exact, move |r, _| draw(&p, dt, r).0))
}

/// One simulated step broken into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpStep {
    pub log_return: f64,
    pub n_jumps: u64,
    /// Compensated jump increment `sum ln Y_j - lambda dt mu_y`.
    pub compensated_jump: f64,
}

/// `n` independent one-step draws with their jump counts.
pub fn simulate_steps(params: &JumpGbmParams, dt: f64, n: usize, rng: &mut RngStream) -> Result<Vec<JumpStep>> {
    params.validate()?;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    Ok((0..n)
        .map(|_| {
            let (x, k, j) = draw(params, dt, rng);
            JumpStep {
                log_return: x,
                n_jumps: k,
                compensated_jump: j - params.lambda * dt * params.mu_y,
            }
        })
        .collect())
}

struct Coords {
    dt: f64,
    scale: f64,
}

impl Coords {
    // u = (diffusion mean per step / scale, ln(sigma sqrt dt / scale),
    //      ln(lambda dt), mu_y / scale, ln(sigma_y / scale))
    fn to_params(&self, u: &[f64]) -> JumpGbmParams {
        let sigma = u[1].exp() * self.scale / self.dt.sqrt();
        JumpGbmParams {
            mu: u[0] * self.scale / self.dt + 0.5 * sigma * sigma,
            sigma,
            lambda: u[2].exp() / self.dt,
            mu_y: u[3] * self.scale,
            sigma_y: u[4].exp() * self.scale,
        }
    }

    fn to_coords(&self, p: &JumpGbmParams) -> Vec<f64> {
        vec![
            (p.mu - 0.5 * p.sigma * p.sigma) * self.dt / self.scale,
            (p.sigma * self.dt.sqrt() / self.scale).ln(),
            (p.lambda * self.dt).ln(),
            p.mu_y / self.scale,
            (p.sigma_y / self.scale).max(1e-6).ln(),
        ]
    }
}

/// Moment-based start for a fixed intensity: jump size from the fourth
/// cumulant, its sign from the third, diffusion from the remaining variance.
fn start_for_intensity(lambda: f64, dt: f64, mean: f64, var: f64, k3: f64, k4: f64) -> JumpGbmParams {
    let ld = lambda * dt;
    let mut size = if k4 > 0.0 { (k4 / ld).powf(0.25) } else { 0.5 * var.sqrt() };
    size = size.min((0.8 * var / ld).sqrt());
    let mu_y = if k3 < 0.0 { -size } else { size };
    let sigma_y = 0.25 * size;
    let jump_var = ld * (mu_y * mu_y + sigma_y * sigma_y);
    let diff_var = (var - jump_var).max(0.05 * var);
    let sigma = (diff_var / dt).sqrt();
    JumpGbmParams {
        mu: (mean - ld * mu_y) / dt + 0.5 * sigma * sigma,
        sigma,
        lambda,
        mu_y,
        sigma_y,
    }
}

/// Intensities (per year) tried as starting points.
pub const LAMBDA_GRID: [f64; 5] = [0.1, 1.0, 5.0, 10.0, 25.0];

/// Maximum likelihood over the Poisson mixture density. Starts from each
/// intensity in [`LAMBDA_GRID`] and from the fitted GBM with a vanishing
/// intensity, so the result never falls below the GBM likelihood.
pub fn calibrate(x: &LogReturns) -> Result<CalibrationResult<JumpGbmParams>> {
    if x.len() < 100 {
        return Err(Error::InvalidSeries(format!("jump calibration needs at least 100 returns, got {}", x.len())));
    }
    let dt = x.dt();
    let v = x.values();
    let mean = stats::mean(v);
    let var = stats::variance(v, false);
    if !(var > 0.0) {
        return Err(Error::DegenerateSeries("log-returns have zero variance".into()));
    }
    let n = v.len() as f64;
    let k3 = v.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / n;
    let k4 = v.iter().map(|r| (r - mean).powi(4)).sum::<f64>() / n - 3.0 * var * var;
    let coords = Coords {
        dt,
        scale: var.sqrt(),
    };
    let g = gbm::calibrate(x)?.params;
    let nested = JumpGbmParams {
        mu: g.mu,
        sigma: g.sigma,
        lambda: 1e-12 / dt,
        mu_y: 0.0,
        sigma_y: var.sqrt(),
    };
    let guess = start_for_intensity(LAMBDA_GRID[2], dt, mean, var, k3, k4);
    let mut starts = vec![coords.to_coords(&guess)];
    for &l in &LAMBDA_GRID {
        if l != LAMBDA_GRID[2] {
            starts.push(coords.to_coords(&start_for_intensity(l, dt, mean, var, k3, k4)));
        }
    }
    starts.push(coords.to_coords(&nested));
    let ll = |u: &[f64]| {
        if u[2] > 2.0 {
            // More than a handful of expected jumps per step is not identifiable.
            return f64::NEG_INFINITY;
        }
        log_likelihood(&coords.to_params(u), x)
    };
    let opts = NelderMeadOptions {
        step: 0.3,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &starts, &opts)?;
    let params = coords.to_params(&best.x);
    let stderr = observed_info_stderr(
        |w: &[f64]| {
            let q = JumpGbmParams {
                mu: w[0],
                sigma: w[1],
                lambda: w[2],
                mu_y: w[3],
                sigma_y: w[4],
            };
            -log_likelihood(&q, x)
        },
        &[params.mu, params.sigma, params.lambda, params.mu_y, params.sigma_y],
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
