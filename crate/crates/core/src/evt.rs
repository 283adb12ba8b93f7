//! Peaks over threshold: generalized Pareto fits to threshold excesses and
//! the tail quantile (VaR) and expected shortfall estimators built on them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::optim::{maximize, observed_info_stderr, NelderMeadOptions};
use crate::rng::RngStream;
use crate::stats;
use crate::types::CalibrationResult;

/// Below this `|xi|` the exponential limit is used.
const XI_ZERO: f64 = 1e-8;
pub const MIN_EXCEEDANCES: usize = 30;

/// `G(y) = 1 - (1 + xi y / beta)^(-1/xi)`, or `1 - e^{-y/beta}` at `xi = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub beta: f64,
}

impl GpdParams {
    pub fn new(xi: f64, beta: f64) -> Result<Self> {
        let p = Self { xi, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.xi.is_finite(), || "xi must be finite".into())?;
        ensure_param(self.beta > 0.0 && self.beta.is_finite(), || {
            format!("beta must be positive, got {}", self.beta)
        })
    }

    /// Upper end of the support, `-beta / xi` for `xi < 0`.
    pub fn upper_bound(&self) -> f64 {
        if self.xi < 0.0 {
            -self.beta / self.xi
        } else {
            f64::INFINITY
        }
    }

    fn check_support(&self, y: f64) -> Result<()> {
        if !(y >= 0.0) || y > self.upper_bound() {
            return Err(Error::OutOfSupport { x: y });
        }
        Ok(())
    }

    /// `ln(1 + xi y / beta) / xi`, continuous through `xi = 0`.
    fn log_term(&self, y: f64) -> f64 {
        let z = y / self.beta;
        if self.xi.abs() < XI_ZERO {
            z
        } else {
            (self.xi * z).ln_1p() / self.xi
        }
    }
}

pub fn gpd_cdf(y: f64, params: &GpdParams) -> Result<f64> {
    params.validate()?;
    params.check_support(y)?;
    Ok(-(-params.log_term(y)).exp_m1())
}

pub fn gpd_pdf(y: f64, params: &GpdParams) -> Result<f64> {
    params.validate()?;
    params.check_support(y)?;
    Ok(ln_pdf_unchecked(y, params).exp())
}

fn ln_pdf_unchecked(y: f64, p: &GpdParams) -> f64 {
    let z = y / p.beta;
    if p.xi.abs() < XI_ZERO {
        -p.beta.ln() - z
    } else {
        let t = 1.0 + p.xi * z;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -p.beta.ln() - (1.0 + 1.0 / p.xi) * t.ln()
    }
}

/// Inverse of [`gpd_cdf`].
pub fn gpd_quantile(prob: f64, params: &GpdParams) -> Result<f64> {
    params.validate()?;
    if !(0.0..1.0).contains(&prob) {
        return Err(Error::InvalidProbability {
            p: prob,
            reason: "must lie in [0, 1)".into(),
        });
    }
    let l = -(-prob).ln_1p();
    Ok(if params.xi.abs() < XI_ZERO {
        params.beta * l
    } else {
        params.beta * (params.xi * l).exp_m1() / params.xi
    })
}

/// Inverse-transform GPD variates.
pub fn gpd_sample(params: &GpdParams, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    params.validate()?;
    (0..n).map(|_| gpd_quantile(rng.uniform(), params)).collect()
}

pub fn gpd_log_likelihood(params: &GpdParams, y: &[f64]) -> f64 {
    if params.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    let ub = params.upper_bound();
    let mut ll = 0.0;
    for &v in y {
        if v > ub {
            return f64::NEG_INFINITY;
        }
        ll += ln_pdf_unchecked(v, params);
    }
    ll
}

/// Log-likelihood of the exponential fit (`xi = 0`, `beta` = sample mean).
pub fn exponential_log_likelihood(y: &[f64]) -> f64 {
    let m = stats::mean(y);
    -(y.len() as f64) * (m.ln() + 1.0)
}

/// Maximum likelihood over `(xi, ln beta)`. Starts from the exponential fit
/// and from the method-of-moments estimate
/// `xi = (1 - m^2/s^2) / 2`, `beta = m (1 + m^2/s^2) / 2`.
pub fn gpd_fit(y: &[f64]) -> Result<CalibrationResult<GpdParams>> {
    if y.len() < MIN_EXCEEDANCES {
        return Err(Error::TooFewExceedances {
            found: y.len(),
            required: MIN_EXCEEDANCES,
        });
    }
    if let Some(&bad) = y.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::OutOfSupport { x: bad });
    }
    let m = stats::mean(y);
    let s2 = stats::variance(y, true);
    if !(s2 > 0.0) || !(m > 0.0) {
        return Err(Error::DegenerateSeries("excesses are all equal".into()));
    }
    let r = m * m / s2;
    let moment = GpdParams {
        xi: (0.5 * (1.0 - r)).clamp(-0.45, 0.9),
        beta: 0.5 * m * (1.0 + r),
    };
    let expo = GpdParams { xi: 0.0, beta: m };
    let to_params = |u: &[f64]| GpdParams {
        xi: u[0],
        beta: u[1].exp(),
    };
    let starts = vec![vec![expo.xi, expo.beta.ln()], vec![moment.xi, moment.beta.ln()]];
    let ll = |u: &[f64]| gpd_log_likelihood(&to_params(u), y);
    let opts = NelderMeadOptions {
        step: 0.1,
        f_tol: 1e-12,
        ..Default::default()
    };
    let (best, initial_ll) = maximize(ll, &starts, &opts)?;
    let params = to_params(&best.x);
    let stderr = observed_info_stderr(
        |v: &[f64]| -gpd_log_likelihood(&GpdParams { xi: v[0], beta: v[1] }, y),
        &[params.xi, params.beta],
    );
    Ok(CalibrationResult {
        params,
        log_likelihood: -best.value,
        initial_guess: expo,
        initial_log_likelihood: initial_ll,
        iterations: best.iterations,
        converged: best.converged,
        stderr_estimates: stderr,
    })
}

/// Threshold, sample size and exceedance count of a tail fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub gpd: GpdParams,
    pub threshold: f64,
    pub n: usize,
    pub n_exceed: usize,
}

impl TailFit {
    fn exceed_rate(&self) -> f64 {
        self.n_exceed as f64 / self.n as f64
    }

    fn check(&self) -> Result<()> {
        self.gpd.validate()?;
        ensure_param(self.n_exceed >= 1 && self.n_exceed <= self.n, || {
            format!("need 1 <= n_exceed <= n, got {} and {}", self.n_exceed, self.n)
        })
    }
}

/// `1 - (N_u / n) (1 + xi (x - u) / beta)^(-1/xi)` for `x >= u`.
pub fn tail_cdf(x: f64, fit: &TailFit) -> Result<f64> {
    fit.check()?;
    let y = x - fit.threshold;
    fit.gpd.check_support(y)?;
    Ok(1.0 - fit.exceed_rate() * (-fit.gpd.log_term(y)).exp())
}

fn check_tail_prob(p: f64, fit: &TailFit) -> Result<()> {
    let rate = fit.exceed_rate();
    if !(p > 0.0 && p < rate) {
        return Err(Error::InvalidProbability {
            p,
            reason: format!("tail probability must lie in (0, N_u/n = {rate})"),
        });
    }
    Ok(())
}

/// Loss level exceeded with probability `p`:
/// `u + (beta / xi) (((n / N_u) p)^(-xi) - 1)`, or `u + beta ln(N_u / (n p))` at `xi = 0`.
pub fn var_estimate(p: f64, fit: &TailFit) -> Result<f64> {
    fit.check()?;
    check_tail_prob(p, fit)?;
    let ratio = fit.exceed_rate() / p;
    let l = ratio.ln();
    let GpdParams { xi, beta } = fit.gpd;
    Ok(if xi.abs() < XI_ZERO {
        fit.threshold + beta * l
    } else if (xi * l).abs() < 1e-3 {
        fit.threshold + beta * (xi * l).exp_m1() / xi
    } else {
        fit.threshold + beta * (ratio.powf(xi) - 1.0) / xi
    })
}

/// Expected loss beyond [`var_estimate`]: `(VaR + beta - xi u) / (1 - xi)`.
pub fn es_estimate(p: f64, fit: &TailFit) -> Result<f64> {
    if fit.gpd.xi >= 1.0 {
        return Err(Error::ShapeTooHeavy { xi: fit.gpd.xi });
    }
    let var = var_estimate(p, fit)?;
    let GpdParams { xi, beta } = fit.gpd;
    Ok((var + beta - xi * fit.threshold) / (1.0 - xi))
}

/// How the threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThresholdPolicy {
    /// Keep the `round(n (1 - q))` largest losses: `u` is the order statistic
    /// just below them.
    Quantile(f64),
    Explicit(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Quantile(0.9)
    }
}

/// Threshold and the strict exceedances `x - u > 0`.
pub fn select_threshold(losses: &[f64], policy: ThresholdPolicy) -> Result<(f64, Vec<f64>)> {
    if losses.is_empty() || losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSeries("losses must be non-empty and finite".into()));
    }
    let u = match policy {
        ThresholdPolicy::Explicit(u) => u,
        ThresholdPolicy::Quantile(q) => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidProbability {
                    p: q,
                    reason: "threshold quantile must lie in (0, 1)".into(),
                });
            }
            let s = stats::sorted(losses);
            let n = s.len();
            let k = ((n as f64) * (1.0 - q)).round() as usize;
            if k == 0 || k >= n {
                return Err(Error::TooFewExceedances {
                    found: k.min(n),
                    required: MIN_EXCEEDANCES,
                });
            }
            s[n - k - 1]
        }
    };
    let exc = losses.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
    Ok((u, exc))
}

/// Threshold fit plus point VaR and ES at each tail probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub threshold: f64,
    pub n: usize,
    pub n_exceed: usize,
    pub gpd: GpdParams,
    pub log_likelihood: f64,
    pub p_levels: Vec<f64>,
    pub var: Vec<f64>,
    /// `None` where the fitted shape makes the shortfall infinite.
    pub es: Vec<Option<f64>>,
}

impl TailReport {
    pub fn fit(&self) -> TailFit {
        TailFit {
            gpd: self.gpd,
            threshold: self.threshold,
            n: self.n,
            n_exceed: self.n_exceed,
        }
    }
}

fn point_estimates(fit: &TailFit, p_levels: &[f64]) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    let var = p_levels.iter().map(|&p| var_estimate(p, fit)).collect::<Result<Vec<_>>>()?;
    let es = p_levels
        .iter()
        .map(|&p| match es_estimate(p, fit) {
            Ok(v) => Ok(Some(v)),
            Err(Error::ShapeTooHeavy { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((var, es))
}

/// Chooses the threshold, fits the GPD to the excesses and evaluates VaR and
/// ES at each tail probability in `p_levels`.
pub fn pot_pipeline(losses: &[f64], policy: ThresholdPolicy, p_levels: &[f64]) -> Result<TailReport> {
    let (u, exc) = select_threshold(losses, policy)?;
    let cal = gpd_fit(&exc)?;
    let fit = TailFit {
        gpd: cal.params,
        threshold: u,
        n: losses.len(),
        n_exceed: exc.len(),
    };
    let (var, es) = point_estimates(&fit, p_levels)?;
    Ok(TailReport {
        threshold: u,
        n: fit.n,
        n_exceed: fit.n_exceed,
        gpd: fit.gpd,
        log_likelihood: cal.log_likelihood,
        p_levels: p_levels.to_vec(),
        var,
        es,
    })
}

/// Percentile bootstrap intervals for VaR and ES at each tail probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIntervals {
    pub level: f64,
    pub n_boot: usize,
    pub var: Vec<(f64, f64)>,
    pub es: Vec<Option<(f64, f64)>>,
}

/// Resamples the excesses of `report` with replacement, refits, and takes
/// percentile intervals of the resulting VaR and ES. Resample `b` uses child
/// stream `b` of `rng`; replications whose fit fails are skipped.
pub fn bootstrap_intervals(
    losses: &[f64],
    report: &TailReport,
    n_boot: usize,
    level: f64,
    rng: &RngStream,
) -> Result<TailIntervals> {
    ensure_param(n_boot >= 2, || "n_boot must be at least 2".into())?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidProbability {
            p: level,
            reason: "confidence level must lie in (0, 1)".into(),
        });
    }
    let u = report.threshold;
    let exc: Vec<f64> = losses.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
    let k = exc.len();
    let mut vars: Vec<Vec<f64>> = vec![Vec::new(); report.p_levels.len()];
    let mut ess: Vec<Vec<f64>> = vec![Vec::new(); report.p_levels.len()];
    for b in 0..n_boot {
        let mut r = rng.child(b as u64);
        let sample: Vec<f64> = (0..k).map(|_| exc[((r.uniform() * k as f64) as usize).min(k - 1)]).collect();
        let Ok(cal) = gpd_fit(&sample) else { continue };
        let fit = TailFit {
            gpd: cal.params,
            ..report.fit()
        };
        let Ok((v, e)) = point_estimates(&fit, &report.p_levels) else { continue };
        for i in 0..v.len() {
            vars[i].push(v[i]);
            if let Some(x) = e[i] {
                ess[i].push(x);
            }
        }
    }
    let lo = 0.5 * (1.0 - level);
    let hi = 1.0 - lo;
    let interval = |v: &[f64]| {
        let s = stats::sorted(v);
        (stats::quantile_sorted(&s, lo), stats::quantile_sorted(&s, hi))
    };
    if vars.iter().any(|v| v.is_empty()) {
        return Err(Error::OptimizerFailed("no bootstrap replication could be fitted".into()));
    }
    Ok(TailIntervals {
        level,
        n_boot,
        var: vars.iter().map(|v| interval(v)).collect(),
        es: ess
            .iter()
            .map(|v| if v.len() * 2 >= n_boot { Some(interval(v)) } else { None })
            .collect(),
    })
}

/// `(u, mean excess over u, number of exceedances)` for each threshold.
pub fn mean_excess(losses: &[f64], thresholds: &[f64]) -> Vec<(f64, f64, usize)> {
    thresholds
        .iter()
        .map(|&u| {
            let exc: Vec<f64> = losses.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
            let m = if exc.is_empty() { f64::NAN } else { stats::mean(&exc) };
            (u, m, exc.len())
        })
        .collect()
}
