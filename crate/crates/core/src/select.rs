//! Model selection: a stationarity screen picks between the random-walk and
//! mean-reverting families, then every family in that row is fitted and the
//! fits are ranked by AIC.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{adf_test, moment_summary, AdfReport};
use crate::error::{Error, Result};
use crate::meanrev::{ar1_ols, cir_calibrate, exp_vasicek_calibrate, vasicek_calibrate_ols};
use crate::subordinated::{nig_calibrate, vg_calibrate};
use crate::types::{to_log_returns, TimeSeries};
use crate::{garch, gbm, jumps, meanrev_jumps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbm,
    Jumps,
    Ngarch,
    Vg,
    Nig,
    Vasicek,
    ExpVasicek,
    Cir,
    JumpVasicek,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Gbm,
        ModelKind::Jumps,
        ModelKind::Ngarch,
        ModelKind::Vg,
        ModelKind::Nig,
        ModelKind::Vasicek,
        ModelKind::ExpVasicek,
        ModelKind::Cir,
        ModelKind::JumpVasicek,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbm => "gbm",
            ModelKind::Jumps => "jumps",
            ModelKind::Ngarch => "ngarch",
            ModelKind::Vg => "vg",
            ModelKind::Nig => "nig",
            ModelKind::Vasicek => "vasicek",
            ModelKind::ExpVasicek => "expvasicek",
            ModelKind::Cir => "cir",
            ModelKind::JumpVasicek => "jumpvasicek",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Number of free parameters counted by AIC.
    pub fn n_params(self) -> usize {
        match self {
            ModelKind::Gbm => 2,
            ModelKind::Jumps | ModelKind::Ngarch => 5,
            ModelKind::Vg | ModelKind::Nig => 4,
            ModelKind::Vasicek | ModelKind::ExpVasicek | ModelKind::Cir => 3,
            ModelKind::JumpVasicek => 6,
        }
    }

    pub fn mean_reverting(self) -> bool {
        matches!(
            self,
            ModelKind::Vasicek | ModelKind::ExpVasicek | ModelKind::Cir | ModelKind::JumpVasicek
        )
    }

    pub fn fat_tailed(self) -> bool {
        matches!(
            self,
            ModelKind::Jumps | ModelKind::Ngarch | ModelKind::Vg | ModelKind::Nig | ModelKind::JumpVasicek
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub model: ModelKind,
    pub n_params: usize,
    pub log_likelihood: Option<f64>,
    pub aic: Option<f64>,
    /// Error kind when the fit failed.
    pub error: Option<String>,
}

/// One cell of the two-by-two classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub mean_reverting: bool,
    pub fat_tails: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub n: usize,
    pub adf: AdfReport,
    /// Excess kurtosis of log-returns, or of AR(1) residuals for the
    /// mean-reverting row.
    pub excess_kurtosis: f64,
    /// Excess kurtosis more than three standard errors (`sqrt(24/n)`) above zero.
    pub kurtosis_flag: bool,
    /// Candidates in AIC order; failed fits last.
    pub ranking: Vec<CandidateFit>,
    pub chosen: Option<ModelKind>,
    pub cell: Option<Cell>,
}

fn fit(model: ModelKind, series: &TimeSeries) -> Result<f64> {
    let levels = series.values();
    let dt = series.dt();
    Ok(match model {
        ModelKind::Gbm => gbm::calibrate(&to_log_returns(series)?)?.log_likelihood,
        ModelKind::Jumps => jumps::calibrate(&to_log_returns(series)?)?.log_likelihood,
        ModelKind::Ngarch => garch::calibrate(to_log_returns(series)?.values(), dt)?.log_likelihood,
        ModelKind::Vg => vg_calibrate(&to_log_returns(series)?)?.log_likelihood,
        ModelKind::Nig => nig_calibrate(&to_log_returns(series)?)?.log_likelihood,
        ModelKind::Vasicek => vasicek_calibrate_ols(levels, dt)?.log_likelihood,
        ModelKind::ExpVasicek => exp_vasicek_calibrate(levels, dt)?.log_likelihood,
        ModelKind::Cir => cir_calibrate(levels, dt)?.log_likelihood,
        ModelKind::JumpVasicek => meanrev_jumps::calibrate(levels, dt, false)?.log_likelihood,
    })
}

/// Runs the ADF test (intercept, `lags` lagged differences) on log-levels, or
/// on levels when some are not positive, to pick the row. Fat-tailed families
/// are admissible only when the kurtosis screen flags the series. The
/// admissible families of the row are fitted and ranked by AIC.
pub fn model_select_report(series: &TimeSeries, lags: usize) -> Result<SelectionReport> {
    let n = series.len();
    if n < 300 {
        return Err(Error::InvalidSeries(format!("model selection needs at least 300 observations, got {n}")));
    }
    let levels = series.values();
    let positive = levels.iter().all(|&v| v > 0.0);
    let adf = if positive {
        let logs: Vec<f64> = levels.iter().map(|v| v.ln()).collect();
        adf_test(&logs, lags)?
    } else {
        adf_test(levels, lags)?
    };
    let mean_reverting = adf.reject_5pct;
    let excess_kurtosis = if mean_reverting {
        let a = ar1_ols(levels)?;
        let resid: Vec<f64> = levels.windows(2).map(|w| w[1] - a.c - a.b * w[0]).collect();
        moment_summary(&resid)?.excess_kurtosis
    } else if positive {
        moment_summary(to_log_returns(series)?.values())?.excess_kurtosis
    } else {
        f64::NAN
    };
    let kurtosis_flag = excess_kurtosis > 3.0 * (24.0 / n as f64).sqrt();
    let mut ranking: Vec<CandidateFit> = ModelKind::ALL
        .into_iter()
        .filter(|m| m.mean_reverting() == mean_reverting && (kurtosis_flag || !m.fat_tailed()))
        .map(|model| {
            let k = model.n_params();
            match fit(model, series) {
                Ok(ll) if ll.is_finite() => CandidateFit {
                    model,
                    n_params: k,
                    log_likelihood: Some(ll),
                    aic: Some(2.0 * k as f64 - 2.0 * ll),
                    error: None,
                },
                Ok(_) => CandidateFit {
                    model,
                    n_params: k,
                    log_likelihood: None,
                    aic: None,
                    error: Some("OptimizerFailed".into()),
                },
                Err(e) => CandidateFit {
                    model,
                    n_params: k,
                    log_likelihood: None,
                    aic: None,
                    error: Some(e.kind().into()),
                },
            }
        })
        .collect();
    ranking.sort_by(|a, b| match (a.aic, b.aic) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let chosen = ranking.first().filter(|c| c.aic.is_some()).map(|c| c.model);
    Ok(SelectionReport {
        n,
        adf,
        excess_kurtosis,
        kurtosis_flag,
        ranking,
        chosen,
        cell: chosen.map(|m| Cell {
            mean_reverting: m.mean_reverting(),
            fat_tails: m.fat_tailed(),
        }),
    })
}
