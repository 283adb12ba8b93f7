//! Batch front end for the `stochkit` library: CSV in, JSON/CSV artifacts out.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stochkit::select::ModelKind;
use stochkit::Scheme;

mod commands;
pub mod ingest;
pub mod models;
pub mod output;

pub use ingest::{ingest_csv, parse_csv};

/// A failure, identified by a stable `module::Kind` code.
#[derive(Debug)]
pub enum CliError {
    Lib { module: &'static str, source: stochkit::Error },
    Io { path: PathBuf, message: String },
    Usage(String),
}

impl CliError {
    pub fn lib(module: &'static str, source: stochkit::Error) -> Self {
        CliError::Lib { module, source }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// Machine-readable error code, e.g. `meanrev::NonStationaryEstimate`.
    pub fn code(&self) -> String {
        match self {
            CliError::Lib { module, source } => format!("{module}::{}", source.kind()),
            CliError::Io { .. } => "cli::IoError".into(),
            CliError::Usage(_) => "cli::UsageError".into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib { .. } => 1,
            CliError::Io { .. } => 3,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib { source, .. } => write!(f, "{}: {source}", self.code()),
            CliError::Io { path, message } => write!(f, "{}: {}: {message}", self.code(), path.display()),
            CliError::Usage(m) => write!(f, "{}: {m}", self.code()),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Frequency {
    /// dt = 1/252
    Daily,
    /// dt = 1/52
    Weekly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VasicekMethod {
    Ols,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Exact,
    Euler,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Exact => Scheme::Exact,
            SchemeArg::Euler => Scheme::Euler,
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|m| m.name()).collect();
        format!("unknown model '{s}', expected one of {}", names.join(", "))
    })
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} is not in (0, 1)"))
    }
}

/// Observation spacing, in years.
#[derive(Debug, Clone, Args)]
pub struct Sampling {
    /// Sampling frequency of the input series.
    #[arg(long, value_enum, default_value_t = Frequency::Daily)]
    pub freq: Frequency,
    /// Explicit step in years; overrides --freq.
    #[arg(long)]
    pub dt: Option<f64>,
}

impl Sampling {
    pub fn dt(&self) -> Result<f64, CliError> {
        let dt = self.dt.unwrap_or(match self.freq {
            Frequency::Daily => 1.0 / 252.0,
            Frequency::Weekly => 1.0 / 52.0,
        });
        if dt > 0.0 && dt.is_finite() {
            Ok(dt)
        } else {
            Err(CliError::lib("cli", stochkit::Error::InvalidParam(format!("dt must be positive, got {dt}"))))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Directory for the output artifacts (created if missing).
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Format of the main report.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "stochkit", version, about = "Simulate, calibrate and risk-measure stochastic processes")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Moments, ACF/PACF, ADF test, AR(1) fit and QQ data of a series.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        /// Lagged differences in the ADF regression.
        #[arg(long, default_value_t = 1)]
        lags: usize,
        /// Largest ACF/PACF lag.
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Fit one model family by maximum likelihood (or OLS).
    Calibrate {
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        /// Estimator for the Vasicek family.
        #[arg(long, value_enum, default_value_t = VasicekMethod::Ols)]
        method: VasicekMethod,
        #[command(flatten)]
        output: Output,
    },
    /// Simulate sample paths from given or calibrated parameters.
    Simulate {
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        /// Parameters as a JSON object, or @file.json.
        #[arg(long, conflicts_with = "input")]
        params: Option<String>,
        /// Calibrate on this series and start from its last value.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Starting level (required with --params).
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long, default_value_t = 100)]
        n_paths: usize,
        #[arg(long, conflicts_with = "horizon")]
        n_steps: Option<usize>,
        /// Horizon in years; sets the step count to round(horizon / dt).
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Exact)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// Peaks-over-threshold VaR and expected shortfall of a loss series.
    Risk {
        #[arg(long)]
        input: PathBuf,
        /// Tail probabilities, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_probability, default_value = "0.01")]
        p: Vec<f64>,
        /// Threshold at this empirical quantile of the losses.
        #[arg(long, value_parser = parse_probability, conflicts_with = "threshold")]
        threshold_quantile: Option<f64>,
        /// Explicit threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Bootstrap resamples for the intervals (0 disables them).
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, value_parser = parse_probability, default_value = "0.95")]
        level: f64,
        /// Treat the input as price levels and use negative log-returns as losses.
        #[arg(long)]
        from_levels: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// Stationarity screen, fits of the admissible families and AIC ranking.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, default_value_t = 1)]
        lags: usize,
        #[command(flatten)]
        output: Output,
    },
}

/// Executes one command and returns the files written.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    commands::run(&config.command)
}
