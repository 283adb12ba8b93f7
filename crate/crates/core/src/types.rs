use serde::Serialize;

use crate::error::{Error, Result};

/// Regularly spaced observations of a level process.
///
/// `times` are model times in years. Calendar dates, when known, travel along
/// as `labels` and are never used for arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    dt: f64,
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
        }
        if times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps for {} values",
                times.len(),
                values.len()
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidSeries("need at least two observations".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite value at index {i}")));
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::InvalidSeries(format!(
                    "timestamps not strictly increasing at index {}",
                    i + 1
                )));
            }
            if ((step - dt) / dt).abs() > 1e-9 {
                return Err(Error::InvalidSeries(format!(
                    "spacing {step} at index {} inconsistent with dt = {dt}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            times,
            values,
            dt,
            labels: None,
        })
    }

    /// Series sampled at `0, dt, 2 dt, ...`.
    pub fn regular(values: Vec<f64>, dt: f64) -> Result<Self> {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        Self::new(times, values, dt)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} labels for {} values",
                labels.len(),
                self.values.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps the observations whose index satisfies `keep`, re-timing them on
    /// the regular grid.
    pub(crate) fn retain_indices(&self, keep: &[usize]) -> Result<Self> {
        let values: Vec<f64> = keep.iter().map(|&i| self.values[i]).collect();
        let mut out = Self::regular(values, self.dt)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(keep.iter().map(|&i| labels[i].clone()).collect());
        }
        if let Some(&first) = keep.first() {
            let t0 = self.times[first];
            out.times.iter_mut().for_each(|t| *t += t0);
        }
        Ok(out)
    }
}

/// Log-returns `x_i = log s_i - log s_{i-1}` of a positive level series.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReturns {
    values: Vec<f64>,
    dt: f64,
}

impl LogReturns {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite return at index {i}")));
        }
        Ok(Self { values, dt })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Levels obtained by cumulating the returns from `s0`.
    pub fn to_levels(&self, s0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut log_s = s0.ln();
        out.push(s0);
        for x in &self.values {
            log_s += x;
            out.push(log_s.exp());
        }
        out
    }
}

pub fn to_log_returns(series: &TimeSeries) -> Result<LogReturns> {
    let v = series.values();
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(Error::NonPositiveLevel { index, value });
    }
    let returns = v.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    LogReturns::new(returns, series.dt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Exact,
    Euler,
}

/// Simulated sample paths, stored row-major: path `p`, step `i` lives at
/// `values[p * (n_steps + 1) + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl PathSet {
    pub(crate) fn from_fn(
        n_paths: usize,
        n_steps: usize,
        dt: f64,
        seed: u64,
        scheme: Scheme,
        mut fill: impl FnMut(usize, &mut [f64]),
    ) -> Self {
        let width = n_steps + 1;
        let mut values = vec![0.0; n_paths * width];
        for (p, row) in values.chunks_mut(width).enumerate() {
            fill(p, row);
        }
        Self {
            n_paths,
            n_steps,
            dt,
            values,
            seed,
            scheme,
        }
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.values[p * w..(p + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_steps + 1)
    }

    /// Values of every path at step `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.paths().map(|p| p[i]).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.column(self.n_steps)
    }
}

/// Outcome of a maximum-likelihood (or least-squares) fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult<P> {
    pub params: P,
    pub log_likelihood: f64,
    pub initial_guess: P,
    pub initial_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Asymptotic standard errors from the observed information, in the
    /// order of the parameter struct's fields, when the Hessian is usable.
    pub stderr_estimates: Option<Vec<f64>>,
}

impl<P> CalibrationResult<P> {
    /// Akaike information criterion `2k - 2 log L`.
    pub fn aic(&self, n_params: usize) -> f64 {
        2.0 * n_params as f64 - 2.0 * self.log_likelihood
    }
}
