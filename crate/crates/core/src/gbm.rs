//! Geometric Brownian motion `dS = mu S dt + sigma S dW`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::rng::RngStream;
use crate::sim::{check_grid, log_level_paths};
use crate::specfun::{chi2_quantile, normal_quantile};
use crate::stats;
use crate::types::{CalibrationResult, LogReturns, PathSet, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let p = Self { mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.mu.is_finite(), || format!("mu must be finite, got {}", self.mu))?;
        ensure_param(self.sigma >= 0.0 && self.sigma.is_finite(), || {
            format!("sigma must be finite and >= 0, got {}", self.sigma)
        })
    }

    /// Mean and variance of one log-return over `dt`.
    pub fn step_moments(&self, dt: f64) -> (f64, f64) {
        ((self.mu - 0.5 * self.sigma * self.sigma) * dt, self.sigma * self.sigma * dt)
    }
}

/// Exact simulation `S_{i+1} = S_i exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z)`.
pub fn simulate(
    params: &GbmParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(s0 > 0.0 && s0.is_finite(), || format!("s0 must be positive, got {s0}"))?;
    let (m, v) = params.step_moments(dt);
    let sd = v.sqrt();
    Ok(log_level_paths(s0, n_steps, n_paths, dt, rng, Scheme::Exact, |r, _| {
        m + sd * r.normal()
    }))
}

/// Gaussian log-likelihood of log-returns with per-step mean `m`, variance `v`.
pub fn gaussian_log_likelihood(x: &[f64], m: f64, v: f64) -> f64 {
    let ss: f64 = x.iter().map(|r| (r - m) * (r - m)).sum();
    -0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * ss / v
}

pub fn log_likelihood(params: &GbmParams, x: &LogReturns) -> f64 {
    let (m, v) = params.step_moments(x.dt());
    gaussian_log_likelihood(x.values(), m, v)
}

fn mean_var(x: &LogReturns) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::InvalidSeries(format!("need at least 2 returns, got {}", x.len())));
    }
    let m = stats::mean(x.values());
    let v = stats::variance(x.values(), false);
    if !(v > 0.0) {
        return Err(Error::DegenerateSeries("log-returns have zero variance".into()));
    }
    Ok((m, v))
}

/// Closed-form maximum likelihood: `sigma = sqrt(v/dt)`, `mu = m/dt + sigma^2/2`.
pub fn calibrate(x: &LogReturns) -> Result<CalibrationResult<GbmParams>> {
    let (m, v) = mean_var(x)?;
    let dt = x.dt();
    let sigma = (v / dt).sqrt();
    let params = GbmParams {
        mu: m / dt + 0.5 * sigma * sigma,
        sigma,
    };
    let ll = log_likelihood(&params, x);
    let n = x.len() as f64;
    // Delta method on (m, v): se(m) = sqrt(v/n), se(v) = v sqrt(2/n).
    let se_sigma = sigma / (2.0 * n).sqrt();
    let se_mu = ((v / n) / (dt * dt) + (v * v * 2.0 / n) / (4.0 * dt * dt)).sqrt();
    Ok(CalibrationResult {
        params,
        log_likelihood: ll,
        initial_guess: params,
        initial_log_likelihood: ll,
        iterations: 0,
        converged: true,
        stderr_estimates: Some(vec![se_mu, se_sigma]),
    })
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidProbability {
            p: level,
            reason: "confidence level must lie in (0, 1)".into(),
        });
    }
    Ok(())
}

/// Confidence interval for the per-step mean log-return, `m ± z sqrt(v/n)`.
pub fn ci_mean(x: &LogReturns, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidSeries(format!("need at least 2 returns, got {n}")));
    }
    let m = stats::mean(x.values());
    let v = stats::variance(x.values(), false);
    let z = normal_quantile(0.5 * (1.0 + level))?;
    let half = z * (v / n as f64).sqrt();
    Ok((m - half, m + half))
}

/// Confidence interval for the per-step variance, `(n v / q_hi, n v / q_lo)`
/// with chi-squared quantiles on `n` degrees of freedom.
pub fn ci_variance(x: &LogReturns, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    let (_, v) = mean_var(x)?;
    let n = x.len() as f64;
    let q_lo = chi2_quantile(0.5 * (1.0 - level), n)?;
    let q_hi = chi2_quantile(0.5 * (1.0 + level), n)?;
    Ok((n * v / q_hi, n * v / q_lo))
}

/// Parametric bootstrap of the `(m, v)` estimators: each replication simulates
/// `n_obs` log-returns from `params` on its own child stream and re-estimates.
pub fn bootstrap_params(
    params: &GbmParams,
    n_obs: usize,
    dt: f64,
    n_boot: usize,
    rng: &RngStream,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    ensure_param(n_boot >= 1, || "n_boot must be at least 1".into())?;
    ensure_param(n_obs >= 1, || "n_obs must be at least 1".into())?;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    let (m, v) = params.step_moments(dt);
    let sd = v.sqrt();
    Ok((0..n_boot)
        .map(|b| {
            let mut r = rng.child(b as u64);
            let x: Vec<f64> = (0..n_obs).map(|_| m + sd * r.normal()).collect();
            (stats::mean(&x), stats::variance(&x, false))
        })
        .collect())
}

/// Lognormal quantile of `S(T)`.
pub fn horizon_percentile(params: &GbmParams, s0: f64, horizon: f64, p: f64) -> Result<f64> {
    params.validate()?;
    ensure_param(horizon > 0.0, || format!("horizon must be positive, got {horizon}"))?;
    ensure_param(s0 > 0.0, || format!("s0 must be positive, got {s0}"))?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!("p must lie in (0, 1), got {p}")));
    }
    let z = normal_quantile(p)?;
    let (m, v) = params.step_moments(horizon);
    Ok(s0 * (m + v.sqrt() * z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vol_is_deterministic() {
        let p = GbmParams::new(0.05, 0.0).unwrap();
        let ps = simulate(&p, 100.0, 252, 3, 1.0 / 252.0, &RngStream::new(1, 0)).unwrap();
        for path in ps.paths() {
            let want = 100.0 * (0.05f64).exp();
            assert!((path[252] / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_calibration() {
        let x = LogReturns::new(vec![0.01, 0.03], 1.0).unwrap();
        let c = calibrate(&x).unwrap();
        assert!((c.params.sigma - 0.01).abs() < 1e-15);
        assert!((c.params.mu - 0.02005).abs() < 1e-15);
        assert!(matches!(
            calibrate(&LogReturns::new(vec![0.01; 5], 1.0).unwrap()),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn drift_estimate_telescopes() {
        let levels = [100.0, 101.0, 99.5, 102.25, 103.0];
        let x: Vec<f64> = levels.windows(2).map(|w: &[f64]| (w[1] / w[0]).ln()).collect();
        let m = stats::mean(&x) * x.len() as f64;
        assert!((m - (levels[4] / levels[0]).ln()).abs() < 1e-14);
    }

    #[test]
    fn ci_uses_standard_normal_quantile() {
        let x = LogReturns::new(vec![0.0, 0.02, -0.01, 0.01], 1.0).unwrap();
        let (lo, hi) = ci_mean(&x, 0.95).unwrap();
        let v = stats::variance(x.values(), false);
        assert!(((hi - lo) / 2.0 - 1.959964 * (v / 4.0).sqrt()).abs() < 1e-8);
        let (vlo, vhi) = ci_variance(&x, 0.95).unwrap();
        assert!(vlo < v && v < vhi);
    }

    #[test]
    fn bootstrap_without_noise() {
        let p = GbmParams::new(0.1, 0.0).unwrap();
        let b = bootstrap_params(&p, 10, 0.5, 1, &RngStream::new(0, 0)).unwrap();
        assert!((b[0].0 - 0.05).abs() < 1e-15);
        assert_eq!(b[0].1, 0.0);
    }

    #[test]
    fn percentile_median_and_zero_vol() {
        let p = GbmParams::new(0.05, 0.2).unwrap();
        let med = horizon_percentile(&p, 100.0, 3.0, 0.5).unwrap();
        assert!((med - 100.0 * ((0.05 - 0.02) * 3.0f64).exp()).abs() < 1e-10);
        let q = GbmParams::new(0.05, 0.0).unwrap();
        let v = horizon_percentile(&q, 100.0, 3.0, 0.9).unwrap();
        assert!((v - 100.0 * 0.15f64.exp()).abs() < 1e-10);
    }
}
