use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use stochkit::diagnostics::{self, QqReference};
use stochkit::evt::{self, ThresholdPolicy};
use stochkit::meanrev::{self, Ar1Coeffs};
use stochkit::select::{model_select_report, ModelKind};
use stochkit::{stats, to_log_returns, RngStream, Scheme, TimeSeries};

use crate::models::{self, ModelParams};
use crate::output::{document, fmt_f64, Writer};
use crate::{ingest_csv, CliError, Command, Format, Output};

const FAN_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

fn report(w: &mut Writer, output: &Output, stem: &str, doc: &Value) -> Result<(), CliError> {
    match output.format {
        Format::Json => w.json(&format!("{stem}.json"), doc),
        Format::Csv => w.flat(&format!("{stem}.csv"), doc),
    }
}

pub fn run(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Diagnose {
            input,
            sampling,
            lags,
            max_lag,
            output,
        } => diagnose(&ingest_csv(input, sampling.dt()?)?, *lags, *max_lag, output),
        Command::Calibrate {
            model,
            input,
            sampling,
            method,
            output,
        } => {
            let series = ingest_csv(input, sampling.dt()?)?;
            let fit = models::calibrate(*model, &series, *method)?;
            let mut w = Writer::new(&output.output_dir)?;
            report(&mut w, output, "calibrate", &document("calibrate", &fit.report))?;
            Ok(w.written().to_vec())
        }
        Command::Simulate {
            model,
            params,
            input,
            s0,
            n_paths,
            n_steps,
            horizon,
            scheme,
            seed,
            sampling,
            output,
        } => {
            let dt = sampling.dt()?;
            let (params, start, source) = match (params, input) {
                (Some(text), _) => {
                    let s0 = s0.ok_or_else(|| CliError::Usage("--params needs --s0".into()))?;
                    (models::parse_params(*model, &read_params(text)?)?, s0, "params")
                }
                (None, Some(path)) => {
                    let series = ingest_csv(path, dt)?;
                    let fit = models::calibrate(*model, &series, crate::VasicekMethod::Ols)?;
                    let last = *series.values().last().expect("series is non-empty");
                    (fit.params, s0.unwrap_or(last), "calibrated")
                }
                (None, None) => return Err(CliError::Usage("simulate needs --params or --input".into())),
            };
            let steps = match (n_steps, horizon) {
                (Some(n), _) => *n,
                (None, Some(h)) if *h > 0.0 => (h / dt).round().max(1.0) as usize,
                (None, Some(h)) => return Err(CliError::Usage(format!("horizon must be positive, got {h}"))),
                (None, None) => 252,
            };
            simulate(*model, &params, start, source, steps, *n_paths, dt, *seed, (*scheme).into(), output)
        }
        Command::Risk {
            input,
            p,
            threshold_quantile,
            threshold,
            bootstrap,
            level,
            from_levels,
            seed,
            sampling,
            output,
        } => {
            let series = ingest_csv(input, sampling.dt()?)?;
            let losses: Vec<f64> = if *from_levels {
                to_log_returns(&series)
                    .map_err(|e| CliError::lib("evt", e))?
                    .values()
                    .iter()
                    .map(|r| -r)
                    .collect()
            } else {
                series.values().to_vec()
            };
            let policy = match (threshold, threshold_quantile) {
                (Some(u), _) => ThresholdPolicy::Explicit(*u),
                (None, Some(q)) => ThresholdPolicy::Quantile(*q),
                (None, None) => ThresholdPolicy::default(),
            };
            risk(&losses, policy, p, *bootstrap, *level, *seed, output)
        }
        Command::Select {
            input,
            sampling,
            lags,
            output,
        } => select(&ingest_csv(input, sampling.dt()?)?, *lags, output),
    }
}

fn read_params(text: &str) -> Result<String, CliError> {
    match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(Path::new(path), e)),
        None => Ok(text.to_string()),
    }
}

#[derive(Serialize)]
struct Ar1Report {
    c: f64,
    b: f64,
    delta: f64,
}

fn diagnose(series: &TimeSeries, lags: usize, max_lag: usize, output: &Output) -> Result<Vec<PathBuf>, CliError> {
    let err = |e| CliError::lib("diagnostics", e);
    let levels = series.values();
    let positive = levels.iter().all(|&v| v > 0.0);
    let returns: Vec<f64> = if positive {
        to_log_returns(series).map_err(err)?.values().to_vec()
    } else {
        levels.windows(2).map(|w| w[1] - w[0]).collect()
    };
    let moments = diagnostics::moment_summary(&returns).map_err(err)?;
    let adf = diagnostics::adf_test(levels, lags).map_err(err)?;
    let ar1 = meanrev::ar1_ols(levels).map_err(|e| CliError::lib("meanrev", e))?;
    let implied = meanrev::params_from_ar1(ar1, series.dt()).ok();
    let keep = diagnostics::outlier_keep_indices(levels);
    let mut flagged = Vec::new();
    let mut k = 0;
    for i in 0..levels.len() {
        if keep.get(k) == Some(&i) {
            k += 1;
        } else {
            flagged.push(series.labels().map_or_else(|| i.to_string(), |l| l[i].clone()));
        }
    }
    let Ar1Coeffs { c, b, delta } = ar1;
    let body = json!({
        "n": series.len(),
        "dt": series.dt(),
        "returns": if positive { "log" } else { "difference" },
        "moments": moments,
        "adf": adf,
        "ar1": Ar1Report { c, b, delta },
        "implied_vasicek": implied,
        "outliers": flagged,
    });
    let lag_cap = max_lag.min(returns.len().saturating_sub(1) / 2).max(1);
    let r_acf = diagnostics::acf(&returns, lag_cap).map_err(err)?;
    let r_pacf = diagnostics::pacf(&returns, lag_cap).map_err(err)?;
    let l_acf = diagnostics::acf(levels, lag_cap).map_err(err)?;
    let l_pacf = diagnostics::pacf(levels, lag_cap).map_err(err)?;
    let acf_rows: Vec<Vec<String>> = (1..=lag_cap)
        .map(|k| {
            vec![
                k.to_string(),
                fmt_f64(r_acf[k]),
                fmt_f64(r_pacf[k - 1]),
                fmt_f64(l_acf[k]),
                fmt_f64(l_pacf[k - 1]),
            ]
        })
        .collect();
    let sd = moments.variance.sqrt();
    let z: Vec<f64> = returns.iter().map(|r| (r - moments.mean) / sd).collect();
    let qq = diagnostics::qq_data(&z, &QqReference::Normal).map_err(err)?;
    let qq_rows: Vec<Vec<String>> = qq.iter().map(|(a, b)| vec![fmt_f64(*a), fmt_f64(*b)]).collect();

    let mut w = Writer::new(&output.output_dir)?;
    report(&mut w, output, "diagnose", &document("diagnose", &body))?;
    w.table(
        "acf.csv",
        &["lag", "returns_acf", "returns_pacf", "levels_acf", "levels_pacf"],
        &acf_rows,
    )?;
    w.table("qq.csv", &["normal_quantile", "standardized_return"], &qq_rows)?;
    Ok(w.written().to_vec())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    model: ModelKind,
    params: &ModelParams,
    s0: f64,
    source: &str,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
    scheme: Scheme,
    output: &Output,
) -> Result<Vec<PathBuf>, CliError> {
    let rng = RngStream::new(seed, 0);
    let paths = models::simulate(params, s0, n_steps, n_paths, dt, &rng, scheme)?;
    let mut header: Vec<String> = vec!["step".into(), "time".into()];
    header.extend((0..n_paths).map(|p| format!("path_{p}")));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut path_rows = Vec::with_capacity(n_steps + 1);
    let mut fan_rows = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let col = paths.column(i);
        let mut row = vec![i.to_string(), fmt_f64(i as f64 * dt)];
        row.extend(col.iter().map(|v| fmt_f64(*v)));
        path_rows.push(row);
        let s = stats::sorted(&col);
        let mut fan = vec![i.to_string(), fmt_f64(i as f64 * dt)];
        fan.extend(FAN_LEVELS.iter().map(|&q| fmt_f64(stats::quantile_sorted(&s, q))));
        fan_rows.push(fan);
    }
    let terminal = paths.terminal();
    let ts = stats::sorted(&terminal);
    let body = json!({
        "model": model,
        "source": source,
        "params": params,
        "s0": s0,
        "dt": dt,
        "n_steps": n_steps,
        "n_paths": n_paths,
        "seed": seed,
        "scheme": scheme,
        "terminal": {
            "mean": stats::mean(&terminal),
            "sd": stats::variance(&terminal, n_paths > 1).sqrt(),
            "p05": stats::quantile_sorted(&ts, 0.05),
            "p50": stats::quantile_sorted(&ts, 0.5),
            "p95": stats::quantile_sorted(&ts, 0.95),
        },
    });
    let mut w = Writer::new(&output.output_dir)?;
    report(&mut w, output, "simulate", &document("simulate", &body))?;
    w.table("paths.csv", &header_ref, &path_rows)?;
    w.table("fan.csv", &["step", "time", "p05", "p25", "p50", "p75", "p95"], &fan_rows)?;
    Ok(w.written().to_vec())
}

fn risk(
    losses: &[f64],
    policy: ThresholdPolicy,
    p_levels: &[f64],
    n_boot: usize,
    level: f64,
    seed: u64,
    output: &Output,
) -> Result<Vec<PathBuf>, CliError> {
    let err = |e| CliError::lib("evt", e);
    let tail = evt::pot_pipeline(losses, policy, p_levels).map_err(err)?;
    let intervals = if n_boot > 0 {
        Some(evt::bootstrap_intervals(losses, &tail, n_boot, level, &RngStream::new(seed, 0)).map_err(err)?)
    } else {
        None
    };
    let rows: Vec<Value> = tail
        .p_levels
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let var_ci = intervals.as_ref().map(|b| b.var[i]);
            let es_ci = intervals.as_ref().and_then(|b| b.es[i]);
            json!({
                "p": p,
                "var": tail.var[i],
                "es": tail.es[i],
                "var_interval": var_ci.map(|(a, b)| [a, b]),
                "es_interval": es_ci.map(|(a, b)| [a, b]),
            })
        })
        .collect();
    let body = json!({
        "policy": policy,
        "threshold": tail.threshold,
        "n": tail.n,
        "n_exceed": tail.n_exceed,
        "gpd": tail.gpd,
        "log_likelihood": tail.log_likelihood,
        "bootstrap": intervals.as_ref().map(|b| json!({"n_boot": b.n_boot, "level": b.level, "seed": seed})),
        "levels": rows,
    });
    let doc = document("risk", &body);
    let mut w = Writer::new(&output.output_dir)?;
    match output.format {
        Format::Json => w.json("risk.json", &doc)?,
        Format::Csv => {
            let cell = |v: &Value| match v {
                Value::Null => String::new(),
                other => other.to_string(),
            };
            let flat: Vec<Vec<String>> = doc["levels"]
                .as_array()
                .expect("levels array")
                .iter()
                .map(|r| {
                    vec![
                        doc["schema_version"].to_string(),
                        cell(&r["p"]),
                        cell(&doc["threshold"]),
                        cell(&doc["n"]),
                        cell(&doc["n_exceed"]),
                        cell(&doc["gpd"]["xi"]),
                        cell(&doc["gpd"]["beta"]),
                        cell(&r["var"]),
                        cell(&r["es"]),
                        cell(&r["var_interval"][0]),
                        cell(&r["var_interval"][1]),
                        cell(&r["es_interval"][0]),
                        cell(&r["es_interval"][1]),
                    ]
                })
                .collect();
            w.table(
                "risk.csv",
                &[
                    "schema_version",
                    "p",
                    "threshold",
                    "n",
                    "n_exceed",
                    "xi",
                    "beta",
                    "var",
                    "es",
                    "var_lo",
                    "var_hi",
                    "es_lo",
                    "es_hi",
                ],
                &flat,
            )?
        }
    }
    let s = stats::sorted(losses);
    let thresholds: Vec<f64> = (0..25).map(|i| stats::quantile_sorted(&s, 0.5 + 0.02 * i as f64)).collect();
    let me_rows: Vec<Vec<String>> = evt::mean_excess(losses, &thresholds)
        .into_iter()
        .map(|(u, m, k)| vec![fmt_f64(u), fmt_f64(m), k.to_string()])
        .collect();
    w.table("mean_excess.csv", &["threshold", "mean_excess", "n_exceed"], &me_rows)?;
    Ok(w.written().to_vec())
}

/// Families in each cell of the mean-reversion by tail-weight table.
fn cell_families(mean_reverting: bool, fat_tails: bool) -> Vec<ModelKind> {
    ModelKind::ALL
        .into_iter()
        .filter(|m| m.mean_reverting() == mean_reverting && m.fat_tailed() == fat_tails)
        .collect()
}

fn select(series: &TimeSeries, lags: usize, output: &Output) -> Result<Vec<PathBuf>, CliError> {
    let rep = model_select_report(series, lags).map_err(|e| CliError::lib("cli", e))?;
    let mut table = Vec::new();
    for mr in [false, true] {
        for fat in [false, true] {
            let chosen = rep.cell.is_some_and(|c| c.mean_reverting == mr && c.fat_tails == fat);
            table.push(json!({
                "mean_reverting": mr,
                "fat_tails": fat,
                "families": cell_families(mr, fat),
                "chosen": chosen,
            }));
        }
    }
    let mut body = serde_json::to_value(&rep).expect("selection report serialises");
    body["table"] = Value::Array(table);
    let doc = document("select", &body);

    let mark = |mr: bool, fat: bool| {
        let names: Vec<&str> = cell_families(mr, fat).iter().map(|m| m.name()).collect();
        let hit = rep.cell.is_some_and(|c| c.mean_reverting == mr && c.fat_tails == fat);
        format!("{}{}", if hit { "*" } else { " " }, names.join("/"))
    };
    println!("{:<22}{:<28}fat tails", "", "normal tails");
    println!("{:<22}{:<28}{}", "no mean reversion", mark(false, false), mark(false, true));
    println!("{:<22}{:<28}{}", "mean reversion", mark(true, false), mark(true, true));
    if let Some(m) = rep.chosen {
        println!("chosen: {}", m.name());
    }

    let mut w = Writer::new(&output.output_dir)?;
    match output.format {
        Format::Json => w.json("select.json", &doc)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = doc["ranking"]
                .as_array()
                .expect("ranking array")
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let cell = |v: &Value| match v {
                        Value::Null => String::new(),
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    vec![
                        (i + 1).to_string(),
                        cell(&c["model"]),
                        cell(&c["n_params"]),
                        cell(&c["log_likelihood"]),
                        cell(&c["aic"]),
                        cell(&c["error"]),
                    ]
                })
                .collect();
            w.table("select.csv", &["rank", "model", "n_params", "log_likelihood", "aic", "error"], &rows)?
        }
    }
    Ok(w.written().to_vec())
}
