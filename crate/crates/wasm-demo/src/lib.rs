//! Browser bindings for three interactive views. Each export returns a JSON
//! string; the plain functions underneath are usable (and tested) natively.

use serde_json::{json, Value};
use stochkit::gbm::{self, GbmParams};
use stochkit::jumps::{self, JumpGbmParams};
use stochkit::meanrev::{self, CirParams, VasicekParams};
use stochkit::specfun::normal_pdf;
use stochkit::stats::{quantile_sorted, sorted};
use stochkit::subordinated::{self, NigParams, VgParams};
use stochkit::{PathSet, RngStream, Scheme};
use wasm_bindgen::prelude::*;

pub const FAN_PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Models offered by [`simulate_fan`].
pub const MODELS: [&str; 6] = ["gbm", "jumps", "vg", "nig", "vasicek", "cir"];

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// VG density of a `dt`-increment on a grid spanning five standard deviations
/// around the mean, next to the normal density with the same mean and variance.
pub fn density_curve(params: &VgParams, dt: f64, n_points: usize) -> Result<Value, String> {
    params.validate().map_err(msg)?;
    if n_points < 2 {
        return Err("need at least two grid points".into());
    }
    let (mean, var, skew, kurt) = subordinated::vg_moments(params, dt);
    let sd = var.sqrt();
    let step = 10.0 * sd / (n_points - 1) as f64;
    let x: Vec<f64> = (0..n_points).map(|i| mean - 5.0 * sd + i as f64 * step).collect();
    let vg = x
        .iter()
        .map(|&v| subordinated::vg_density(v, params, dt).map_err(msg))
        .collect::<Result<Vec<f64>, String>>()?;
    let normal: Vec<f64> = x.iter().map(|v| normal_pdf((v - mean) / sd) / sd).collect();
    Ok(json!({
        "x": x,
        "vg": vg,
        "normal": normal,
        "moments": {"mean": mean, "sd": sd, "skewness": skew, "excess_kurtosis": kurt - 3.0},
    }))
}

/// 5/25/50/75/95% quantiles of the VG log-return over `n_horizons` evenly
/// spaced horizons up to `horizon`.
pub fn percentile_fan(params: &VgParams, horizon: f64, n_horizons: usize) -> Result<Value, String> {
    if horizon.is_nan() || horizon <= 0.0 || n_horizons == 0 {
        return Err("horizon and number of horizons must be positive".into());
    }
    let t: Vec<f64> = (1..=n_horizons).map(|i| horizon * i as f64 / n_horizons as f64).collect();
    let q = subordinated::vg_percentiles(params, &t, &FAN_PROBS).map_err(msg)?;
    Ok(json!({"t": t, "probs": FAN_PROBS, "quantiles": q}))
}

fn run_model(model: &str, params: &str, s0: f64, n_steps: usize, n_paths: usize, dt: f64, rng: &RngStream) -> Result<PathSet, String> {
    macro_rules! parse {
        ($t:ty) => {
            serde_json::from_str::<$t>(params).map_err(|e| format!("bad {model} parameters: {e}"))?
        };
    }
    match model {
        "gbm" => gbm::simulate(&parse!(GbmParams), s0, n_steps, n_paths, dt, rng),
        "jumps" => jumps::simulate(&parse!(JumpGbmParams), s0, n_steps, n_paths, dt, rng),
        "vg" => subordinated::vg_simulate(&parse!(VgParams), s0, n_steps, n_paths, dt, rng),
        "nig" => subordinated::nig_simulate(&parse!(NigParams), s0, n_steps, n_paths, dt, rng),
        "vasicek" => meanrev::vasicek_simulate(&parse!(VasicekParams), s0, n_steps, n_paths, dt, rng),
        "cir" => meanrev::cir_simulate(&parse!(CirParams), s0, n_steps, n_paths, dt, rng, Scheme::Exact),
        other => return Err(format!("unknown model '{other}', expected one of {}", MODELS.join(", "))),
    }
    .map_err(msg)
}

/// Simulates `n_paths` paths and returns the per-step percentile fan plus the
/// first few paths for drawing.
pub fn path_fan(
    model: &str,
    params: &str,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Value, String> {
    let paths = run_model(model, params, s0, n_steps, n_paths, dt, &RngStream::new(seed, 0))?;
    let fan: Vec<Vec<f64>> = (0..=n_steps)
        .map(|i| {
            let col = sorted(&paths.column(i));
            FAN_PROBS.iter().map(|&p| quantile_sorted(&col, p)).collect()
        })
        .collect();
    let sample: Vec<&[f64]> = paths.paths().take(5).collect();
    let t: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
    Ok(json!({"t": t, "probs": FAN_PROBS, "fan": fan, "paths": sample}))
}

fn vg(mu_bar: f64, theta_bar: f64, sigma_bar: f64, nu: f64) -> Result<VgParams, JsError> {
    VgParams::new(mu_bar, theta_bar, sigma_bar, nu).map_err(|e| JsError::new(&e.to_string()))
}

fn out(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = vgDensity)]
pub fn vg_density(mu_bar: f64, theta_bar: f64, sigma_bar: f64, nu: f64, dt: f64, n_points: usize) -> Result<String, JsError> {
    out(density_curve(&vg(mu_bar, theta_bar, sigma_bar, nu)?, dt, n_points))
}

#[wasm_bindgen(js_name = vgPercentiles)]
pub fn vg_percentiles(mu_bar: f64, theta_bar: f64, sigma_bar: f64, nu: f64, horizon: f64, n_horizons: usize) -> Result<String, JsError> {
    out(percentile_fan(&vg(mu_bar, theta_bar, sigma_bar, nu)?, horizon, n_horizons))
}

#[wasm_bindgen(js_name = simulateFan)]
pub fn simulate_fan(
    model: &str,
    params_json: &str,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<String, JsError> {
    out(path_fan(model, params_json, s0, n_steps, n_paths, dt, seed))
}
