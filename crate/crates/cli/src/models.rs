//! Per-family dispatch: calibration, parameter parsing and simulation.

use serde::Serialize;
use serde_json::{Map, Value};
use stochkit::garch::NgarchParams;
use stochkit::gbm::GbmParams;
use stochkit::jumps::JumpGbmParams;
use stochkit::meanrev::{self, CirParams, ExpVasicekParams, VasicekParams};
use stochkit::meanrev_jumps::JumpVasicekParams;
use stochkit::select::ModelKind;
use stochkit::subordinated::{self, NigParams, VgParams};
use stochkit::{garch, gbm, jumps, meanrev_jumps, to_log_returns, CalibrationResult, PathSet, RngStream, Scheme, TimeSeries};

use crate::{CliError, VasicekMethod};

/// Library module that owns a family, used to qualify its error codes.
pub fn module(model: ModelKind) -> &'static str {
    match model {
        ModelKind::Gbm => "gbm",
        ModelKind::Jumps => "jumps",
        ModelKind::Ngarch => "garch",
        ModelKind::Vg | ModelKind::Nig => "subordinated",
        ModelKind::Vasicek | ModelKind::ExpVasicek | ModelKind::Cir => "meanrev",
        ModelKind::JumpVasicek => "meanrev_jumps",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelParams {
    Gbm(GbmParams),
    Jumps(JumpGbmParams),
    Ngarch(NgarchParams),
    Vg(VgParams),
    Nig(NigParams),
    Vasicek(VasicekParams),
    ExpVasicek(ExpVasicekParams),
    Cir(CirParams),
    JumpVasicek(JumpVasicekParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gbm(_) => ModelKind::Gbm,
            ModelParams::Jumps(_) => ModelKind::Jumps,
            ModelParams::Ngarch(_) => ModelKind::Ngarch,
            ModelParams::Vg(_) => ModelKind::Vg,
            ModelParams::Nig(_) => ModelKind::Nig,
            ModelParams::Vasicek(_) => ModelKind::Vasicek,
            ModelParams::ExpVasicek(_) => ModelKind::ExpVasicek,
            ModelParams::Cir(_) => ModelKind::Cir,
            ModelParams::JumpVasicek(_) => ModelKind::JumpVasicek,
        }
    }
}

/// Fitted parameters with the calibration record as JSON.
pub struct Fit {
    pub params: ModelParams,
    pub report: Value,
}

#[derive(Serialize)]
struct Report<'a, P> {
    model: ModelKind,
    method: &'a str,
    n: usize,
    dt: f64,
    n_params: usize,
    log_likelihood: f64,
    aic: f64,
    converged: bool,
    iterations: usize,
    params: &'a P,
    initial_guess: &'a P,
    initial_log_likelihood: f64,
    stderr: Option<Map<String, Value>>,
}

fn report<P: Serialize>(model: ModelKind, method: &str, series: &TimeSeries, r: &CalibrationResult<P>) -> Value {
    let names: Vec<String> = match serde_json::to_value(&r.params) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    };
    let stderr = r
        .stderr_estimates
        .as_ref()
        .map(|se| names.iter().cloned().zip(se.iter().map(|&v| Value::from(v))).collect());
    let k = model.n_params();
    serde_json::to_value(Report {
        model,
        method,
        n: series.len(),
        dt: series.dt(),
        n_params: k,
        log_likelihood: r.log_likelihood,
        aic: r.aic(k),
        converged: r.converged,
        iterations: r.iterations,
        params: &r.params,
        initial_guess: &r.initial_guess,
        initial_log_likelihood: r.initial_log_likelihood,
        stderr,
    })
    .expect("reports serialise")
}

pub fn calibrate(model: ModelKind, series: &TimeSeries, method: VasicekMethod) -> Result<Fit, CliError> {
    let err = |e| CliError::lib(module(model), e);
    let levels = series.values();
    let dt = series.dt();
    let returns = || to_log_returns(series).map_err(err);
    macro_rules! fit {
        ($variant:ident, $method:expr, $result:expr) => {{
            let r = $result.map_err(err)?;
            Fit {
                params: ModelParams::$variant(r.params),
                report: report(model, $method, series, &r),
            }
        }};
    }
    Ok(match model {
        ModelKind::Gbm => fit!(Gbm, "mle", gbm::calibrate(&returns()?)),
        ModelKind::Jumps => fit!(Jumps, "mle", jumps::calibrate(&returns()?)),
        ModelKind::Ngarch => fit!(Ngarch, "mle", garch::calibrate(returns()?.values(), dt)),
        ModelKind::Vg => fit!(Vg, "mle", subordinated::vg_calibrate(&returns()?)),
        ModelKind::Nig => fit!(Nig, "mle", subordinated::nig_calibrate(&returns()?)),
        ModelKind::Vasicek => match method {
            VasicekMethod::Ols => fit!(Vasicek, "ols", meanrev::vasicek_calibrate_ols(levels, dt)),
            VasicekMethod::Mle => fit!(Vasicek, "mle", meanrev::vasicek_calibrate_mle(levels, dt)),
        },
        ModelKind::ExpVasicek => fit!(ExpVasicek, "ols", meanrev::exp_vasicek_calibrate(levels, dt)),
        ModelKind::Cir => fit!(Cir, "mle", meanrev::cir_calibrate(levels, dt)),
        ModelKind::JumpVasicek => fit!(JumpVasicek, "mle", meanrev_jumps::calibrate(levels, dt, false)),
    })
}

/// Reads parameters for `model` from a JSON object. Exponential Vasicek takes
/// the log-space `alpha`, `theta`, `sigma`.
pub fn parse_params(model: ModelKind, json: &str) -> Result<ModelParams, CliError> {
    let usage = |e: serde_json::Error| CliError::Usage(format!("bad --params for {}: {e}", model.name()));
    let v: Value = serde_json::from_str(json).map_err(usage)?;
    let p = match model {
        ModelKind::Gbm => ModelParams::Gbm(serde_json::from_value(v).map_err(usage)?),
        ModelKind::Jumps => ModelParams::Jumps(serde_json::from_value(v).map_err(usage)?),
        ModelKind::Ngarch => ModelParams::Ngarch(serde_json::from_value(v).map_err(usage)?),
        ModelKind::Vg => ModelParams::Vg(serde_json::from_value(v).map_err(usage)?),
        ModelKind::Nig => ModelParams::Nig(serde_json::from_value(v).map_err(usage)?),
        ModelKind::Vasicek => ModelParams::Vasicek(serde_json::from_value(v).map_err(usage)?),
        ModelKind::ExpVasicek => {
            let log: VasicekParams = serde_json::from_value(v).map_err(usage)?;
            ModelParams::ExpVasicek(ExpVasicekParams::from_log(&log))
        }
        ModelKind::Cir => ModelParams::Cir(serde_json::from_value(v).map_err(usage)?),
        ModelKind::JumpVasicek => ModelParams::JumpVasicek(serde_json::from_value(v).map_err(usage)?),
    };
    Ok(p)
}

pub fn simulate(
    params: &ModelParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
    scheme: Scheme,
) -> Result<PathSet, CliError> {
    let err = |e| CliError::lib(module(params.kind()), e);
    match params {
        ModelParams::Gbm(p) => gbm::simulate(p, s0, n_steps, n_paths, dt, rng),
        ModelParams::Jumps(p) => jumps::simulate(p, s0, n_steps, n_paths, dt, rng),
        ModelParams::Ngarch(p) => garch::simulate(p, s0, n_steps, n_paths, dt, rng).map(|s| s.paths),
        ModelParams::Vg(p) => subordinated::vg_simulate(p, s0, n_steps, n_paths, dt, rng),
        ModelParams::Nig(p) => subordinated::nig_simulate(p, s0, n_steps, n_paths, dt, rng),
        ModelParams::Vasicek(p) => meanrev::vasicek_simulate(p, s0, n_steps, n_paths, dt, rng),
        ModelParams::ExpVasicek(p) => meanrev::exp_vasicek_simulate(p, s0, n_steps, n_paths, dt, rng),
        ModelParams::Cir(p) => meanrev::cir_simulate(p, s0, n_steps, n_paths, dt, rng, scheme),
        ModelParams::JumpVasicek(p) => meanrev_jumps::simulate(p, s0, n_steps, n_paths, dt, rng),
    }
    .map_err(err)
}

