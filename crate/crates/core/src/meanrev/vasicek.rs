use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::optim::observed_info_stderr;
use crate::rng::RngStream;
use crate::sim::{check_grid, state_paths};
use crate::stats;
use crate::types::{CalibrationResult, PathSet, Scheme};

/// `dx = alpha (theta - x) dt + sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasicekParams {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: f64,
}

/// Exact AR(1) form of a Vasicek step: `x_i = c + b x_{i-1} + delta eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ar1Coeffs {
    pub c: f64,
    pub b: f64,
    pub delta: f64,
}

impl VasicekParams {
    pub fn new(alpha: f64, theta: f64, sigma: f64) -> Result<Self> {
        let p = Self { alpha, theta, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.alpha > 0.0 && self.alpha.is_finite(), || {
            format!("alpha must be positive, got {}", self.alpha)
        })?;
        ensure_param(self.theta.is_finite(), || "theta must be finite".into())?;
        ensure_param(self.sigma >= 0.0 && self.sigma.is_finite(), || {
            format!("sigma must be >= 0, got {}", self.sigma)
        })
    }

    pub fn ar1(&self, dt: f64) -> Ar1Coeffs {
        let b = (-self.alpha * dt).exp();
        // 1 - e^{-x} and 1 - e^{-2x} via exp_m1 for small alpha dt.
        let one_m_b = -(-self.alpha * dt).exp_m1();
        let one_m_b2 = -(-2.0 * self.alpha * dt).exp_m1();
        Ar1Coeffs {
            c: self.theta * one_m_b,
            b,
            delta: self.sigma * (one_m_b2 / (2.0 * self.alpha)).sqrt(),
        }
    }

    /// Conditional mean of `x(t)` given `x(0) = x0`.
    pub fn mean(&self, x0: f64, t: f64) -> f64 {
        self.theta + (x0 - self.theta) * (-self.alpha * t).exp()
    }

    /// Conditional variance of `x(t)`.
    pub fn variance(&self, t: f64) -> f64 {
        self.sigma * self.sigma * -(-2.0 * self.alpha * t).exp_m1() / (2.0 * self.alpha)
    }
}

/// Maps AR(1) coefficients back to `(alpha, theta, sigma)`:
/// `alpha = -ln b / dt`, `theta = c / (1 - b)`,
/// `sigma = delta / sqrt((b^2 - 1) dt / (2 ln b))`.
pub fn params_from_ar1(coeffs: Ar1Coeffs, dt: f64) -> Result<VasicekParams> {
    let Ar1Coeffs { c, b, delta } = coeffs;
    ensure_param(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::NonStationaryEstimate { b });
    }
    let ln_b = b.ln();
    let alpha = -ln_b / dt;
    let sigma = delta / ((b * b - 1.0) * dt / (2.0 * ln_b)).sqrt();
    VasicekParams::new(alpha, c / (1.0 - b), sigma)
}

/// Exact simulation through the AR(1) form.
pub fn vasicek_simulate(
    params: &VasicekParams,
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    params.validate()?;
    check_grid(n_paths, dt)?;
    ensure_param(x0.is_finite(), || "x0 must be finite".into())?;
    let Ar1Coeffs { c, b, delta } = params.ar1(dt);
    Ok(state_paths(x0, n_steps, n_paths, dt, rng, Scheme::Exact, |r, x, _| {
        c + b * x + delta * r.normal()
    }))
}

/// Log of the Gaussian transition density.
pub fn vasicek_transition_ln_pdf(x_next: f64, x_prev: f64, params: &VasicekParams, dt: f64) -> f64 {
    let Ar1Coeffs { c, b, delta } = params.ar1(dt);
    let e = x_next - c - b * x_prev;
    -0.5 * ((2.0 * PI * delta * delta).ln() + e * e / (delta * delta))
}

/// Exact conditional log-likelihood of the observed path `x`.
pub fn vasicek_log_likelihood(params: &VasicekParams, x: &[f64], dt: f64) -> f64 {
    if params.validate().is_err() || !(params.sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    x.windows(2)
        .map(|w| vasicek_transition_ln_pdf(w[1], w[0], params, dt))
        .sum()
}

fn check_input(x: &[f64], dt: f64) -> Result<()> {
    if x.len() < 10 {
        return Err(Error::InvalidSeries(format!("need at least 10 observations, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSeries("observations must be finite".into()));
    }
    ensure_param(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))
}

fn fit_result(coeffs: Ar1Coeffs, x: &[f64], dt: f64) -> Result<CalibrationResult<VasicekParams>> {
    if !(coeffs.delta > 0.0) {
        return Err(Error::DegenerateSeries("AR(1) residuals are all zero".into()));
    }
    let params = params_from_ar1(coeffs, dt)?;
    let ll = vasicek_log_likelihood(&params, x, dt);
    let stderr = observed_info_stderr(
        |v: &[f64]| match VasicekParams::new(v[0], v[1], v[2]) {
            Ok(p) => -vasicek_log_likelihood(&p, x, dt),
            Err(_) => f64::NAN,
        },
        &[params.alpha, params.theta, params.sigma],
    );
    Ok(CalibrationResult {
        params,
        log_likelihood: ll,
        initial_guess: params,
        initial_log_likelihood: ll,
        iterations: 0,
        converged: true,
        stderr_estimates: stderr,
    })
}

/// Least-squares AR(1) coefficients of `x_i` on `x_{i-1}`; `delta^2` is the
/// mean squared residual.
pub fn ar1_ols(x: &[f64]) -> Result<Ar1Coeffs> {
    if x.len() < 3 {
        return Err(Error::InvalidSeries(format!("need at least 3 observations, got {}", x.len())));
    }
    let prev = &x[..x.len() - 1];
    let next = &x[1..];
    let mp = stats::mean(prev);
    let mn = stats::mean(next);
    let sxx: f64 = prev.iter().map(|a| (a - mp) * (a - mp)).sum();
    let sxy: f64 = prev.iter().zip(next).map(|(a, b)| (a - mp) * (b - mn)).sum();
    if !(sxx > 0.0) {
        return Err(Error::SingularRegression("lagged values are constant".into()));
    }
    let b = sxy / sxx;
    let c = mn - b * mp;
    let n = prev.len() as f64;
    let ss: f64 = prev.iter().zip(next).map(|(a, y)| (y - c - b * a).powi(2)).sum();
    Ok(Ar1Coeffs {
        c,
        b,
        delta: (ss / n).sqrt(),
    })
}

/// Ordinary least squares on the AR(1) form, then the parameter mapping.
/// Fails with `NonStationaryEstimate` when the slope is outside `(0, 1)`.
pub fn vasicek_calibrate_ols(x: &[f64], dt: f64) -> Result<CalibrationResult<VasicekParams>> {
    check_input(x, dt)?;
    fit_result(ar1_ols(x)?, x, dt)
}

/// Closed-form maximum likelihood estimators written in raw sums.
pub fn vasicek_calibrate_mle(x: &[f64], dt: f64) -> Result<CalibrationResult<VasicekParams>> {
    check_input(x, dt)?;
    let n = (x.len() - 1) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for w in x.windows(2) {
        sx += w[0];
        sy += w[1];
        sxx += w[0] * w[0];
        sxy += w[0] * w[1];
    }
    let den = n * sxx - sx * sx;
    if !(den.abs() > 1e-14 * n * sxx) {
        return Err(Error::SingularRegression("lagged values are constant".into()));
    }
    let b = (n * sxy - sx * sy) / den;
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::NonStationaryEstimate { b });
    }
    let theta = (sy - b * sx) / (n * (1.0 - b));
    let c = theta * (1.0 - b);
    let d2 = x
        .windows(2)
        .map(|w| (w[1] - b * w[0] - c).powi(2))
        .sum::<f64>()
        / n;
    fit_result(Ar1Coeffs { c, b, delta: d2.sqrt() }, x, dt)
}

/// Exponential Vasicek: `ln x` follows a Vasicek process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpVasicekParams {
    pub alpha: f64,
    /// Long-run mean of `ln x`.
    pub theta: f64,
    pub sigma: f64,
    /// Reversion level in `dx = alpha x (m - ln x) dt + sigma x dW`,
    /// `m = theta + sigma^2 / (2 alpha)`.
    pub m: f64,
}

impl ExpVasicekParams {
    pub fn from_log(p: &VasicekParams) -> Self {
        Self {
            alpha: p.alpha,
            theta: p.theta,
            sigma: p.sigma,
            m: p.theta + p.sigma * p.sigma / (2.0 * p.alpha),
        }
    }

    pub fn log_params(&self) -> VasicekParams {
        VasicekParams {
            alpha: self.alpha,
            theta: self.theta,
            sigma: self.sigma,
        }
    }
}

fn logs(levels: &[f64]) -> Result<Vec<f64>> {
    levels
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value > 0.0 {
                Ok(value.ln())
            } else {
                Err(Error::NonPositiveLevel { index, value })
            }
        })
        .collect()
}

/// Log-likelihood of positive levels, including the `-sum ln x_i` Jacobian.
pub fn exp_vasicek_log_likelihood(params: &ExpVasicekParams, levels: &[f64], dt: f64) -> Result<f64> {
    let y = logs(levels)?;
    let jac: f64 = y[1..].iter().sum();
    Ok(vasicek_log_likelihood(&params.log_params(), &y, dt) - jac)
}

/// Calibrates the Vasicek law of `ln x` by least squares. The reported
/// log-likelihood is that of the levels, so it compares with other models
/// fitted to the same levels.
pub fn exp_vasicek_calibrate(levels: &[f64], dt: f64) -> Result<CalibrationResult<ExpVasicekParams>> {
    let y = logs(levels)?;
    let fit = vasicek_calibrate_ols(&y, dt)?;
    let jac: f64 = y[1..].iter().sum();
    let params = ExpVasicekParams::from_log(&fit.params);
    Ok(CalibrationResult {
        params,
        log_likelihood: fit.log_likelihood - jac,
        initial_guess: params,
        initial_log_likelihood: fit.log_likelihood - jac,
        iterations: 0,
        converged: true,
        stderr_estimates: fit.stderr_estimates,
    })
}

/// Simulates `ln x` exactly and exponentiates.
pub fn exp_vasicek_simulate(
    params: &ExpVasicekParams,
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
) -> Result<PathSet> {
    if !(x0 > 0.0) {
        return Err(Error::NonPositiveLevel { index: 0, value: x0 });
    }
    let mut ps = vasicek_simulate(&params.log_params(), x0.ln(), n_steps, n_paths, dt, rng)?;
    for v in ps.values.iter_mut() {
        *v = v.exp();
    }
    Ok(ps)
}
