//! NGARCH(1,1) returns; plain GARCH(1,1) is the `gamma = 0` case.
//!
//! Per step, `x_i = mu dt + eps_i` with `eps_i = sigma_i z_i` and
//!
//! ```text
//! sigma_i^2 = omega + alpha sigma_{i-1}^2 + beta (eps_{i-1} - gamma sigma_{i-1})^2
//! ```
//!
//! `sigma_i^2` is the conditional variance of one step (not annualised).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::rng::RngStream;
use crate::sim::check_grid;
use crate::stats;
use crate::types::{CalibrationResult, PathSet, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma0_sq: f64,
}

impl NgarchParams {
    pub fn validate(&self) -> Result<()> {
        ensure_param(self.mu.is_finite() && self.gamma.is_finite(), || "mu and gamma must be finite".into())?;
        ensure_param(self.omega > 0.0 && self.omega.is_finite(), || {
            format!("omega must be positive, got {}", self.omega)
        })?;
        ensure_param(self.alpha >= 0.0 && self.beta >= 0.0, || {
            format!("alpha and beta must be >= 0, got {} and {}", self.alpha, self.beta)
        })?;
        ensure_param(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite(), || {
            format!("sigma0_sq must be positive, got {}", self.sigma0_sq)
        })?;
        let p = self.persistence();
        if !(p < 1.0) {
            return Err(Error::StationarityViolated(format!(
                "alpha + beta (1 + gamma^2) = {p} must be < 1"
            )));
        }
        Ok(())
    }

    /// `alpha + beta (1 + gamma^2)`.
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta * (1.0 + self.gamma * self.gamma)
    }

    /// Long-run per-step variance `omega / (1 - persistence)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    /// Next conditional variance after shock `eps` from variance `var`.
    pub fn next_variance(&self, var: f64, eps: f64) -> f64 {
        let s = var.sqrt();
        let k = eps - self.gamma * s;
        self.omega + self.alpha * var + self.beta * k * k
    }
}

/// Conditional variances driven by the standardised shocks `z`:
/// `out[0] = sigma0_sq`, `out[i] = next_variance(out[i-1], sqrt(out[i-1]) z[i-1])`.
pub fn variance_path(params: &NgarchParams, z: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len() + 1);
    let mut v = params.sigma0_sq;
    out.push(v);
    for &zi in z {
        v = params.next_variance(v, v.sqrt() * zi);
        out.push(v);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgarchPaths {
    pub paths: PathSet,
    /// Conditional variance used for each step, `n_paths x n_steps`, row-major.
    pub variances: Vec<f64>,
}

/// Simulates levels with `S_{i+1} = S_i (1 + mu dt + sigma_i z_i)`.
pub fn simulate(
    params: &NgarchParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<NgarchPaths> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(s0 > 0.0 && s0.is_finite(), || format!("s0 must be positive, got {s0}"))?;
    let mut variances = vec![0.0; n_paths * n_steps];
    let paths = PathSet::from_fn(n_paths, n_steps, dt, rng.seed(), Scheme::Exact, |p, row| {
        let mut r = rng.child(p as u64);
        let mut v = params.sigma0_sq;
        row[0] = s0;
        for i in 1..=n_steps {
            variances[p * n_steps + i - 1] = v;
            let eps = v.sqrt() * r.normal();
            row[i] = row[i - 1] * (1.0 + params.mu * dt + eps);
            v = params.next_variance(v, eps);
        }
    });
    Ok(NgarchPaths { paths, variances })
}

/// Per-step returns (`mu dt + eps_i`) of one simulated path of length `n`.
pub fn simulate_returns(params: &NgarchParams, n: usize, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    params.validate()?;
    let mut v = params.sigma0_sq;
    Ok((0..n)
        .map(|_| {
            let eps = v.sqrt() * rng.normal();
            v = params.next_variance(v, eps);
            params.mu * dt + eps
        })
        .collect())
}

/// Gaussian conditional log-likelihood of per-step returns `x`.
pub fn log_likelihood(params: &NgarchParams, x: &[f64], dt: f64) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut v = params.sigma0_sq;
    let mut ll = 0.0;
    for &xi in x {
        if !(v > 0.0) || !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        let e = xi - params.mu * dt;
        ll -= 0.5 * (ln_2pi + v.ln() + e * e / v);
        v = params.next_variance(v, e);
    }
    ll
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

struct Coords {
    dt: f64,
    scale: f64,
    var0: f64,
}

impl Coords {
    // u = (mu dt / scale, ln(omega / var0), logit persistence, logit alpha share, gamma)
    fn to_params(&self, u: &[f64]) -> NgarchParams {
        let p = logistic(u[2]);
        let share = logistic(u[3]);
        let gamma = u[4];
        NgarchParams {
            mu: u[0] * self.scale / self.dt,
            omega: self.var0 * u[1].exp(),
            alpha: p * share,
            beta: p * (1.0 - share) / (1.0 + gamma * gamma),
            gamma,
            sigma0_sq: self.var0,
        }
    }

    fn to_coords(&self, q: &NgarchParams) -> Vec<f64> {
        let p = q.persistence();
        let share = q.alpha / p;
        vec![
            q.mu * self.dt / self.scale,
            (q.omega / self.var0).ln(),
            logit(p),
            logit(share.clamp(1e-12, 1.0 - 1e-12)),
            q.gamma,
        ]
    }
}

/// Maximum likelihood under the stationarity constraint, enforced through
/// `persistence = logistic(.)`, `alpha = persistence * share`,
/// `beta = persistence * (1 - share) / (1 + gamma^2)`.
///
/// The initial guess is `alpha = 0.85`, `beta = 0.05`, `gamma = 0`, with omega
/// from the stationary-variance identity and `sigma0_sq` fixed at the sample
/// variance. A second start with almost no persistence nests the constant
/// variance model.
pub fn calibrate(x: &[f64], dt: f64) -> Result<CalibrationResult<NgarchParams>> {
    if x.len() < 50 {
        return Err(Error::InvalidSeries(format!("NGARCH calibration needs at least 50 returns, got {}", x.len())));
    }
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    let m = stats::mean(x);
    let var = stats::variance(x, false);
    if !(var > 0.0) {
        return Err(Error::DegenerateSeries("returns have zero variance".into()));
    }
    let coords = Coords {
        dt,
        scale: var.sqrt(),
        var0: var,
    };
    let guess = NgarchParams {
        mu: m / dt,
        omega: var * (1.0 - 0.9),
        alpha: 0.85,
        beta: 0.05,
        gamma: 0.0,
        sigma0_sq: var,
    };
    guess.validate()?;
    let flat = NgarchParams {
        omega: var * (1.0 - 1e-17),
        alpha: 0.5e-17,
        beta: 0.5e-17,
        ..guess
    };
    let starts = vec![coords.to_coords(&guess), coords.to_coords(&flat)];
    let ll = |u: &[f64]| log_likelihood(&coords.to_params(u), x, dt);
    let opts = NelderMeadOptions {
        step: 0.3,
        max_evals: 30_000,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &starts, &opts)?;
    let params = coords.to_params(&best.x);
    let stderr = observed_info_stderr(
        |v: &[f64]| {
            let q = NgarchParams {
                mu: v[0],
                omega: v[1],
                alpha: v[2],
                beta: v[3],
                gamma: v[4],
                sigma0_sq: var,
            };
            if q.validate().is_err() {
                return f64::NAN;
            }
            -log_likelihood(&q, x, dt)
        },
        &[params.mu, params.omega, params.alpha, params.beta, params.gamma],
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

    fn params(gamma: f64) -> NgarchParams {
        NgarchParams {
            mu: 0.05,
            omega: 1e-6,
            alpha: 0.85,
            beta: 0.05,
            gamma,
            sigma0_sq: 1e-4,
        }
    }

    #[test]
    fn zero_shocks_converge_geometrically() {
        let p = params(0.5);
        let v = variance_path(&p, &[0.0; 400]);
        let k = p.alpha + p.beta * p.gamma * p.gamma;
        for i in 1..v.len() {
            assert!((v[i] - (p.omega + k * v[i - 1])).abs() < 1e-18);
        }
        assert!((v[400] - p.omega / (1.0 - k)).abs() < 1e-12);
    }

    #[test]
    fn bad_news_raises_variance_more() {
        let p = params(0.5);
        let v = 2e-4;
        assert!(p.next_variance(v, -0.01) > p.next_variance(v, 0.01));
        let q = params(0.0);
        assert_eq!(q.next_variance(v, -0.01), q.next_variance(v, 0.01));
    }

    #[test]
    fn garch_special_case_matches_plain_recursion() {
        let p = params(0.0);
        let mut rng = RngStream::new(4, 0);
        let z: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
        let v = variance_path(&p, &z);
        let mut w = p.sigma0_sq;
        for i in 0..z.len() {
            let eps = w.sqrt() * z[i];
            w = p.omega + p.alpha * w + p.beta * eps * eps;
            assert!((w - v[i + 1]).abs() <= 1e-12 * w);
        }
    }

    #[test]
    fn stationarity_enforced() {
        let bad = NgarchParams {
            alpha: 0.05,
            beta: 0.85,
            gamma: 0.5,
            ..params(0.0)
        };
        assert!(matches!(bad.validate(), Err(Error::StationarityViolated(_))));
    }

    #[test]
    fn variance_stays_positive_in_simulation() {
        let out = simulate(&params(0.5), 100.0, 500, 4, 1.0 / 252.0, &RngStream::new(1, 0)).unwrap();
        assert!(out.variances.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn constant_returns_rejected() {
        assert!(calibrate(&[0.001; 100], 1.0).is_err());
    }
}
