//! Pre-calibration analysis: moments, autocorrelations, a fixed-lag augmented
//! Dickey–Fuller test, outlier cleaning and QQ-plot data.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::normal_quantile;
use crate::stats;
use crate::types::TimeSeries;

/// One-percent critical value of the ADF t-statistic (intercept, no trend).
pub const ADF_CRITICAL_1PCT: f64 = -3.44;
/// Five-percent critical value of the ADF t-statistic (intercept, no trend).
pub const ADF_CRITICAL_5PCT: f64 = -2.87;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Sample moments with the biased (divide by `n`) variance.
pub fn moment_summary(x: &[f64]) -> Result<MomentSummary> {
    moment_summary_with(x, false)
}

/// As [`moment_summary`]; `unbiased` switches the variance divisor to `n - 1`.
/// Skewness and kurtosis are always standardised by the biased variance.
pub fn moment_summary_with(x: &[f64], unbiased: bool) -> Result<MomentSummary> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidSeries(format!("need at least 2 observations, got {n}")));
    }
    let nf = n as f64;
    let mean = stats::mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let variance = if unbiased { m2 * nf / (nf - 1.0) } else { m2 };
    Ok(MomentSummary {
        n,
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}

/// Sample autocorrelations for lags `0..=max_lag`,
/// `ACF(k) = sum_{i>k} (x_i - m)(x_{i-k} - m) / ((n - k) v)` with biased `v`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag >= n {
        return Err(Error::InvalidParam(format!("max_lag {max_lag} must be below n = {n}")));
    }
    let m = stats::mean(x);
    let v = stats::variance(x, false);
    if !(v > 0.0) {
        return Err(Error::DegenerateSeries("zero sample variance".into()));
    }
    Ok((0..=max_lag)
        .map(|k| {
            let s: f64 = (k..n).map(|i| (x[i] - m) * (x[i - k] - m)).sum();
            s / ((n - k) as f64 * v)
        })
        .collect())
}

/// Partial autocorrelations for lags `1..=max_lag` by Durbin–Levinson.
pub fn pacf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if 2 * max_lag >= x.len() {
        return Err(Error::InvalidParam(format!(
            "max_lag {max_lag} must be below n/2 = {}",
            x.len() / 2
        )));
    }
    let r = acf(x, max_lag)?;
    Ok(durbin_levinson(&r))
}

/// Partial autocorrelations from autocorrelations `r[0..=p]` (`r[0] = 1`).
pub fn durbin_levinson(r: &[f64]) -> Vec<f64> {
    let p = r.len() - 1;
    let mut out = Vec::with_capacity(p);
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=p {
        let num = r[k] - (0..k - 1).map(|j| phi[j] * r[k - 1 - j]).sum::<f64>();
        let den = 1.0 - (0..k - 1).map(|j| phi[j] * r[j + 1]).sum::<f64>();
        let a = num / den;
        let next: Vec<f64> = (0..k - 1).map(|j| phi[j] - a * phi[k - 2 - j]).chain([a]).collect();
        phi = next;
        out.push(a);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdfReport {
    pub statistic: f64,
    pub lags: usize,
    pub reject_1pct: bool,
    pub reject_5pct: bool,
    pub critical_1pct: f64,
    pub critical_5pct: f64,
}

/// Augmented Dickey–Fuller test with intercept and no trend:
/// `dx_t = a + rho x_{t-1} + sum_j phi_j dx_{t-j} + e_t`, statistic `rho / se(rho)`.
///
/// A series whose regression fits exactly (for instance a straight line
/// `x_t = t`) is rejected with `SingularRegression` rather than reported.
pub fn adf_test(x: &[f64], lags: usize) -> Result<AdfReport> {
    let n = x.len();
    if n <= 10 * (lags + 2) {
        return Err(Error::InvalidParam(format!(
            "ADF with {lags} lags needs more than {} observations, got {n}",
            10 * (lags + 2)
        )));
    }
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // Rows t = lags+1 .. n-1 (indexing levels), dx[t-1] = x_t - x_{t-1}.
    let rows = n - 1 - lags;
    let cols = 2 + lags;
    let mut design = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for r in 0..rows {
        let t = r + lags + 1;
        y[r] = dx[t - 1];
        design[(r, 0)] = 1.0;
        design[(r, 1)] = x[t - 1];
        for j in 1..=lags {
            design[(r, 1 + j)] = dx[t - 1 - j];
        }
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::SingularRegression("ADF design matrix is rank deficient".into()));
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::SingularRegression(e.to_string()))?;
    let resid = &y - &design * &beta;
    let dof = (rows - cols) as f64;
    let s2 = resid.norm_squared() / dof;
    let scale = y.amax().max(1e-300);
    if !(s2.sqrt() > 1e-12 * scale) {
        return Err(Error::SingularRegression("ADF regression fits exactly".into()));
    }
    // (X'X)^{-1} = V diag(1/s^2) V'
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let var_rho: f64 = (0..cols)
        .map(|k| v_t[(k, 1)] * v_t[(k, 1)] / (svd.singular_values[k] * svd.singular_values[k]))
        .sum::<f64>()
        * s2;
    let statistic = beta[1] / var_rho.sqrt();
    Ok(AdfReport {
        statistic,
        lags,
        reject_1pct: statistic < ADF_CRITICAL_1PCT,
        reject_5pct: statistic < ADF_CRITICAL_5PCT,
        critical_1pct: ADF_CRITICAL_1PCT,
        critical_5pct: ADF_CRITICAL_5PCT,
    })
}

/// Indices kept by one pass of the 3-sigma innovation rule.
///
/// Innovations `d_i = x_i - x_{i-1}` further than three standard deviations
/// from their mean are flagged and point `i` is dropped. A flagged innovation
/// of opposite sign directly after a flagged one is the return leg of the
/// same spike and drops nothing more.
pub fn outlier_keep_indices(x: &[f64]) -> Vec<usize> {
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let m = stats::mean(&d);
    let s = stats::variance(&d, false).sqrt();
    let flagged: Vec<bool> = d.iter().map(|v| (v - m).abs() > 3.0 * s).collect();
    let mut drop = vec![false; x.len()];
    for i in 0..d.len() {
        if !flagged[i] {
            continue;
        }
        let closes_spike = i > 0 && flagged[i - 1] && drop[i] && (d[i] - m).signum() != (d[i - 1] - m).signum();
        if !closes_spike {
            drop[i + 1] = true;
        }
    }
    (0..x.len()).filter(|&i| !drop[i]).collect()
}

/// Removes observations whose incoming innovation breaks the 3-sigma rule,
/// re-linking the series over the dropped points. Returns the input unchanged
/// when nothing is flagged.
pub fn clean_outliers(series: &TimeSeries) -> Result<TimeSeries> {
    if series.len() < 10 {
        return Err(Error::InvalidSeries(format!(
            "outlier cleaning needs at least 10 observations, got {}",
            series.len()
        )));
    }
    let keep = outlier_keep_indices(series.values());
    if keep.len() == series.len() {
        return Ok(series.clone());
    }
    series.retain_indices(&keep)
}

#[derive(Debug, Clone, PartialEq)]
pub enum QqReference {
    /// Standard normal quantiles.
    Normal,
    /// Quantiles of another sample, linearly interpolated between the points
    /// `((j - 0.5) / m, y_(j))`.
    Empirical(Vec<f64>),
}

/// `(reference quantile, sample quantile)` pairs at plotting positions
/// `(i - 0.5) / n`.
pub fn qq_data(x: &[f64], reference: &QqReference) -> Result<Vec<(f64, f64)>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidSeries(format!("QQ data needs at least 3 points, got {n}")));
    }
    let xs = stats::sorted(x);
    let positions = (0..n).map(|i| (i as f64 + 0.5) / n as f64);
    match reference {
        QqReference::Normal => positions
            .zip(xs)
            .map(|(p, v)| Ok((normal_quantile(p)?, v)))
            .collect(),
        QqReference::Empirical(sample) => {
            if sample.is_empty() {
                return Err(Error::InvalidSeries("empty reference sample".into()));
            }
            let ys = stats::sorted(sample);
            let m = ys.len() as f64;
            Ok(positions
                .zip(xs)
                .map(|(p, v)| {
                    let h = (p * m - 0.5).clamp(0.0, m - 1.0);
                    let lo = h.floor() as usize;
                    let hi = (lo + 1).min(ys.len() - 1);
                    (ys[lo] + (h - lo as f64) * (ys[hi] - ys[lo]), v)
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn ar1(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        let mut x = Vec::with_capacity(n);
        let mut v = 0.0;
        for _ in 0..n {
            v = alpha * v + rng.normal();
            x.push(v);
        }
        x
    }

    #[test]
    fn moments_of_two_points() {
        let m = moment_summary(&[-1.0, 1.0]).unwrap();
        assert_eq!((m.mean, m.variance, m.skewness), (0.0, 1.0, 0.0));
        assert_eq!(moment_summary_with(&[-1.0, 1.0], true).unwrap().variance, 2.0);
        assert!(moment_summary(&[1.0]).is_err());
    }

    #[test]
    fn moments_translation_invariant() {
        let x = ar1(0.3, 500, 3);
        let y: Vec<f64> = x.iter().map(|v| v + 7.5).collect();
        let (a, b) = (moment_summary(&x).unwrap(), moment_summary(&y).unwrap());
        assert!((b.mean - a.mean - 7.5).abs() < 1e-12);
        assert!((a.variance - b.variance).abs() < 1e-10);
        assert!((a.skewness - b.skewness).abs() < 1e-9);
        assert!((a.excess_kurtosis - b.excess_kurtosis).abs() < 1e-9);
    }

    #[test]
    fn acf_lag_zero_is_one() {
        let x = ar1(0.5, 200, 1);
        assert!((acf(&x, 3).unwrap()[0] - 1.0).abs() < 1e-14);
        assert!(matches!(acf(&[2.0; 10], 2), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn acf_affine_invariant() {
        let x = ar1(0.5, 300, 2);
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v + 11.0).collect();
        for (a, b) in acf(&x, 10).unwrap().iter().zip(acf(&y, 10).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pacf_first_equals_acf() {
        let x = ar1(0.4, 400, 5);
        assert_eq!(pacf(&x, 5).unwrap()[0], acf(&x, 5).unwrap()[1]);
    }

    #[test]
    fn durbin_levinson_on_ar2() {
        // AR(2) with phi = (0.5, 0.3): r1 = phi1/(1-phi2), r2 = phi1 r1 + phi2.
        let r1 = 0.5 / 0.7;
        let r2 = 0.5 * r1 + 0.3;
        let r3 = 0.5 * r2 + 0.3 * r1;
        let p = durbin_levinson(&[1.0, r1, r2, r3]);
        assert!((p[1] - 0.3).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
    }

    #[test]
    fn adf_straight_line_is_singular() {
        let x: Vec<f64> = (0..200).map(|t| t as f64).collect();
        assert!(matches!(adf_test(&x, 1), Err(Error::SingularRegression(_))));
    }

    #[test]
    fn adf_affine_invariant() {
        let x = ar1(0.9, 500, 9);
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 2.0).collect();
        let a = adf_test(&x, 2).unwrap().statistic;
        let b = adf_test(&y, 2).unwrap().statistic;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn clean_outliers_removes_spike() {
        let mut v = vec![1.0; 50];
        v[20] = 11.0;
        let s = TimeSeries::regular(v, 1.0).unwrap();
        let c = clean_outliers(&s).unwrap();
        assert_eq!(c.len(), 49);
        assert!(c.values().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn clean_outliers_identity_without_outliers() {
        let v: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let s = TimeSeries::regular(v, 1.0).unwrap();
        assert_eq!(clean_outliers(&s).unwrap(), s);
    }

    #[test]
    fn qq_on_exact_normal_quantiles() {
        let n = 50;
        let x: Vec<f64> = (0..n)
            .map(|i| normal_quantile((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        for (t, s) in qq_data(&x, &QqReference::Normal).unwrap() {
            assert!((t - s).abs() < 1e-12);
        }
        for (t, s) in qq_data(&x, &QqReference::Empirical(x.clone())).unwrap() {
            assert!((t - s).abs() < 1e-12);
        }
        assert!(qq_data(&[1.0, 2.0], &QqReference::Normal).is_err());
    }
}
