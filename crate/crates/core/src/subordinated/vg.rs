//! Variance Gamma: Brownian motion with drift run on a Gamma clock.
//!
//! Over a step `dt` the log-return is `mu_bar dt + theta_bar g + sigma_bar sqrt(g) Z`
//! with `g ~ Gamma(shape dt/nu, scale nu)`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::quad::integrate;
use crate::rng::{gamma_dist, RngStream};
use crate::sim::{check_grid, log_level_paths};
use crate::specfun::{ln_bessel_k_scaled, ln_gamma, normal_cdf};
use crate::stats::{self, brent_root};
use crate::types::{CalibrationResult, LogReturns, PathSet, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    pub mu_bar: f64,
    pub theta_bar: f64,
    pub sigma_bar: f64,
    pub nu: f64,
}

impl VgParams {
    pub fn new(mu_bar: f64, theta_bar: f64, sigma_bar: f64, nu: f64) -> Result<Self> {
        let p = Self {
            mu_bar,
            theta_bar,
            sigma_bar,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.mu_bar.is_finite() && self.theta_bar.is_finite(), || {
            "drift parameters must be finite".into()
        })?;
        ensure_param(self.sigma_bar > 0.0 && self.sigma_bar.is_finite(), || {
            format!("sigma_bar must be positive, got {}", self.sigma_bar)
        })?;
        ensure_param(self.nu > 0.0 && self.nu.is_finite(), || {
            format!("nu must be positive, got {}", self.nu)
        })
    }
}

/// Smallest `nu` used by the initial guess and the optimiser, relative to `dt`.
pub const NU_FLOOR_REL: f64 = 1e-4;

fn check_dt(dt: f64) -> Result<()> {
    ensure_param(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))
}

/// Log-density of a `dt`-increment.
pub fn vg_ln_density(x: f64, params: &VgParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    Ok(ln_density_unchecked(x, params, dt))
}

fn ln_density_unchecked(x: f64, p: &VgParams, dt: f64) -> f64 {
    let m = p.mu_bar * dt;
    let mut d = x - m;
    if d == 0.0 {
        d = 1e-12 * m.abs().max(1.0);
    }
    let s2 = p.sigma_bar * p.sigma_bar;
    let a = dt / p.nu;
    let order = a - 0.5;
    let root = (2.0 * s2 / p.nu + p.theta_bar * p.theta_bar).sqrt();
    let z = d.abs() * root / s2;
    let ln_k = match ln_bessel_k_scaled(order, z) {
        Ok(v) => v - z,
        Err(_) => return f64::NEG_INFINITY,
    };
    LN_2 + p.theta_bar * d / s2
        - p.sigma_bar.ln()
        - 0.5 * (2.0 * PI).ln()
        - a * p.nu.ln()
        - ln_gamma(a).unwrap_or(f64::NAN)
        + order * (d.abs().ln() - root.ln())
        + ln_k
}

pub fn vg_density(x: f64, params: &VgParams, dt: f64) -> Result<f64> {
    vg_ln_density(x, params, dt).map(f64::exp)
}

/// Mean, variance, skewness and (non-excess) kurtosis of a `dt`-increment.
pub fn vg_moments(params: &VgParams, dt: f64) -> (f64, f64, f64, f64) {
    let VgParams {
        mu_bar: mu,
        theta_bar: th,
        sigma_bar: s,
        nu,
    } = *params;
    let t = dt;
    let s2 = s * s;
    let mean = (mu + th) * t;
    let m2 = (nu * th * th + s2) * t;
    let m3 = (2.0 * th.powi(3) * nu * nu + 3.0 * s2 * nu * th) * t;
    let m4 = (3.0 * nu * s2 * s2 + 12.0 * th * th * s2 * nu * nu + 6.0 * th.powi(4) * nu.powi(3)) * t
        + (3.0 * s2 * s2 + 6.0 * th * th * s2 * nu + 3.0 * th.powi(4) * nu * nu) * t * t;
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Moment-matching starting point: `sigma = sqrt(V/dt)`, `nu = (K/3 - 1) dt`,
/// `theta = S sigma sqrt(dt) / (3 nu)`, `mu = M/dt - theta`.
///
/// When the sample kurtosis does not exceed 3, `nu` is clamped to the floor
/// and the skew term is dropped (`theta = 0`).
pub fn vg_initial_guess(x: &LogReturns) -> Result<VgParams> {
    let ms = crate::diagnostics::moment_summary(x.values())?;
    if !(ms.variance > 0.0) {
        return Err(Error::DegenerateSeries("log-returns have zero variance".into()));
    }
    let dt = x.dt();
    let sigma_bar = (ms.variance / dt).sqrt();
    let kurt = ms.excess_kurtosis + 3.0;
    let floor = NU_FLOOR_REL * dt;
    let raw_nu = (kurt / 3.0 - 1.0) * dt;
    let (nu, theta_bar) = if raw_nu > floor {
        (raw_nu, ms.skewness * sigma_bar * dt.sqrt() / (3.0 * raw_nu))
    } else {
        (floor, 0.0)
    };
    Ok(VgParams {
        mu_bar: ms.mean / dt - theta_bar,
        theta_bar,
        sigma_bar,
        nu,
    })
}

pub fn vg_log_likelihood(params: &VgParams, x: &LogReturns) -> f64 {
    if params.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    x.values()
        .iter()
        .map(|&v| ln_density_unchecked(v, params, x.dt()))
        .sum()
}

struct Coords {
    dt: f64,
    scale: f64,
    floor: f64,
}

impl Coords {
    fn to_params(&self, u: &[f64]) -> VgParams {
        let theta_bar = u[1] * self.scale / self.dt;
        VgParams {
            mu_bar: u[0] * self.scale / self.dt - theta_bar,
            theta_bar,
            sigma_bar: u[2].exp(),
            nu: self.floor + u[3].exp(),
        }
    }

    fn to_coords(&self, p: &VgParams) -> Vec<f64> {
        vec![
            (p.mu_bar + p.theta_bar) * self.dt / self.scale,
            p.theta_bar * self.dt / self.scale,
            p.sigma_bar.ln(),
            (p.nu - self.floor).max(1e-3 * self.floor).ln(),
        ]
    }
}

/// Maximum likelihood fit started from [`vg_initial_guess`], plus a
/// near-Gaussian start that keeps the fit at least as good as the normal law.
pub fn vg_calibrate(x: &LogReturns) -> Result<CalibrationResult<VgParams>> {
    if x.len() < 100 {
        return Err(Error::InvalidSeries(format!("VG calibration needs at least 100 returns, got {}", x.len())));
    }
    let guess = vg_initial_guess(x)?;
    let dt = x.dt();
    let coords = Coords {
        dt,
        scale: stats::variance(x.values(), false).sqrt(),
        floor: NU_FLOOR_REL * dt,
    };
    let m = stats::mean(x.values());
    let gaussian = VgParams {
        mu_bar: m / dt,
        theta_bar: 0.0,
        sigma_bar: guess.sigma_bar,
        nu: coords.floor * 1.001,
    };
    let starts = vec![coords.to_coords(&guess), coords.to_coords(&gaussian)];
    let ll = |u: &[f64]| vg_log_likelihood(&coords.to_params(u), x);
    let opts = NelderMeadOptions {
        step: 0.2,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &starts, &opts)?;
    let params = coords.to_params(&best.x);
    let nat = [params.mu_bar, params.theta_bar, params.sigma_bar, params.nu];
    let stderr = observed_info_stderr(
        |v: &[f64]| {
            -vg_log_likelihood(
                &VgParams {
                    mu_bar: v[0],
                    theta_bar: v[1],
                    sigma_bar: v[2],
                    nu: v[3],
                },
                x,
            )
        },
        &nat,
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

/// Simulates log-levels on a Gamma clock; each step draws `tau ~ Gamma(dt/nu, nu)`.
pub fn vg_simulate(
    params: &VgParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(s0 > 0.0 && s0.is_finite(), || format!("s0 must be positive, got {s0}"))?;
    let clock = gamma_dist(dt / params.nu, params.nu)?;
    let p = *params;
    Ok(log_level_paths(s0, n_steps, n_paths, dt, rng, Scheme::Exact, move |r, _| {
        let tau = r.gamma_one(&clock);
        p.mu_bar * dt + p.theta_bar * tau + p.sigma_bar * tau.sqrt() * r.normal()
    }))
}

/// One-step increments (a convenience for moment and distribution checks).
pub fn vg_increments(params: &VgParams, dt: f64, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    params.validate()?;
    check_dt(dt)?;
    let clock = gamma_dist(dt / params.nu, params.nu)?;
    Ok((0..n)
        .map(|_| {
            let tau = rng.gamma_one(&clock);
            params.mu_bar * dt + params.theta_bar * tau + params.sigma_bar * tau.sqrt() * rng.normal()
        })
        .collect())
}

/// Distribution function of a `dt`-increment, `E_g[Phi((x - m - theta g) / (sigma sqrt g))]`,
/// integrated over the Gamma clock.
pub fn vg_cdf(x: f64, params: &VgParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    let p = *params;
    let a = dt / p.nu;
    let m = p.mu_bar * dt;
    let cond = move |g: f64| {
        if g <= 0.0 {
            return if x >= m { 1.0 } else { 0.0 };
        }
        normal_cdf((x - m - p.theta_bar * g) / (p.sigma_bar * g.sqrt()))
    };
    let value = if a < 1.0 {
        // w = (g/nu)^a has density exp(-w^(1/a)) / Gamma(a + 1) on (0, inf).
        let inv_a = 1.0 / a;
        let lg = ln_gamma(a + 1.0)?;
        let f = |w: f64| {
            let r = w.powf(inv_a);
            cond(p.nu * r) * (-r - lg).exp()
        };
        let top = 60f64.powf(a);
        integrate(&f, 0.0, 1.0, 1e-13, 1e-12)?.value + integrate(&f, 1.0, top.max(1.0), 1e-13, 1e-12)?.value
    } else {
        let lg = ln_gamma(a)?;
        let f = |g: f64| {
            if g <= 0.0 {
                return 0.0;
            }
            let ln_pdf = (a - 1.0) * g.ln() - g / p.nu - a * p.nu.ln() - lg;
            cond(g) * ln_pdf.exp()
        };
        let mode = (a - 1.0) * p.nu;
        let top = p.nu * (a + 15.0 * a.sqrt() + 60.0);
        integrate(&f, 0.0, mode.max(p.nu), 1e-13, 1e-12)?.value
            + integrate(&f, mode.max(p.nu), top, 1e-13, 1e-12)?.value
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Quantiles of the increment over each horizon in `horizons` (rows) at each
/// probability in `probs` (columns), by inverting [`vg_cdf`].
pub fn vg_percentiles(params: &VgParams, horizons: &[f64], probs: &[f64]) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    for &p in probs {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability {
                p,
                reason: "percentile level must lie in (0, 1)".into(),
            });
        }
    }
    horizons
        .iter()
        .map(|&h| {
            check_dt(h)?;
            let (mean, var, _, _) = vg_moments(params, h);
            let sd = var.sqrt();
            probs
                .iter()
                .map(|&prob| {
                    let f = |x: f64| vg_cdf(x, params, h).unwrap_or(f64::NAN) - prob;
                    let mut lo = mean - 4.0 * sd;
                    let mut hi = mean + 4.0 * sd;
                    let mut k = 0;
                    while f(lo) > 0.0 && k < 60 {
                        lo -= 4.0 * sd * 2f64.powi(k);
                        k += 1;
                    }
                    k = 0;
                    while f(hi) < 0.0 && k < 60 {
                        hi += 4.0 * sd * 2f64.powi(k);
                        k += 1;
                    }
                    brent_root(f, lo, hi, 1e-12 * sd.max(1e-300))
                        .ok_or_else(|| Error::QuadratureFailure(format!("could not bracket the {prob} quantile")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mu: f64, th: f64, s: f64, nu: f64) -> VgParams {
        VgParams::new(mu, th, s, nu).unwrap()
    }

    #[test]
    fn symmetric_when_theta_zero() {
        let q = p(0.3, 0.0, 0.9, 0.4);
        for &d in &[0.01, 0.2, 1.0, 3.0] {
            let a = vg_density(0.3 + d, &q, 1.0).unwrap();
            let b = vg_density(0.3 - d, &q, 1.0).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_integer_reduction() {
        // dt = nu: order 1/2 and the density is a skewed two-sided exponential,
        // f(x) = exp(theta d / s^2 - |d| r / s^2) / (s^2 r) * ... with r = sqrt(2 s^2/nu + theta^2).
        let (th, s, nu) = (0.6, 0.9, 0.4);
        let q = p(0.0, th, s, nu);
        let r = (2.0 * s * s / nu + th * th).sqrt();
        for i in -20..=20 {
            let d = i as f64 * 0.17 + 0.05;
            // 2 e^{theta d/s^2} / (s sqrt(2pi) nu) (|d|/r)^{1/2} sqrt(pi s^2/(2|d| r)) e^{-|d| r/s^2}
            let exact = (th * d / (s * s) - d.abs() * r / (s * s)).exp() / (nu * r);
            let got = vg_density(d, &q, nu).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-10, "d={d}: {got} vs {exact}");
        }
    }

    #[test]
    fn moments_formulae() {
        let q = p(0.1, 0.0, 0.2, 0.5);
        let (m, v, s, k) = vg_moments(&q, 0.25);
        assert!((m - 0.025).abs() < 1e-15);
        assert!((v - 0.04 * 0.25).abs() < 1e-15);
        assert_eq!(s, 0.0);
        assert!((k - 3.0 * (1.0 + 0.5 / 0.25)).abs() < 1e-12);
        let q = p(0.1, -0.3, 0.2, 0.5);
        assert!((vg_moments(&q, 2.0).0 - (0.1 - 0.3) * 2.0).abs() < 1e-15);
    }

    #[test]
    fn initial_guess_for_symmetric_data() {
        let x = LogReturns::new(vec![-2.0, -1.0, -0.5, 0.0, 0.0, 0.5, 1.0, 2.0], 1.0).unwrap();
        let g = vg_initial_guess(&x).unwrap();
        assert_eq!(g.theta_bar, 0.0);
        assert!((g.mu_bar - stats::mean(x.values())).abs() < 1e-15);
    }

    #[test]
    fn cdf_is_monotone_and_symmetric() {
        let q = p(0.0, 0.0, 1.4, 0.4);
        let mut prev = 0.0;
        for i in -30..=30 {
            let x = i as f64 * 0.3;
            let c = vg_cdf(x, &q, 1.0).unwrap();
            assert!(c >= prev);
            prev = c;
            let c2 = vg_cdf(-x, &q, 1.0).unwrap();
            assert!((c + c2 - 1.0).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn percentiles_symmetric() {
        let q = p(0.2, 0.0, 1.4, 0.4);
        let rows = vg_percentiles(&q, &[1.0, 3.0], &[0.05, 0.5, 0.95]).unwrap();
        for (h, row) in [1.0, 3.0].iter().zip(&rows) {
            assert!((row[1] - 0.2 * h).abs() < 1e-8);
            assert!((row[0] + row[2] - 2.0 * 0.2 * h).abs() < 1e-8);
        }
    }
}
