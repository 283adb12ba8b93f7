//! Simulation, calibration and risk measurement for a catalogue of
//! stochastic processes used in market and credit risk modelling.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evt;
pub mod garch;
pub mod gbm;
pub mod jumps;
pub mod meanrev;
pub mod meanrev_jumps;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod select;
mod sim;
pub mod specfun;
pub mod stats;
pub mod subordinated;
pub mod types;

pub use error::{Error, Result};
pub use rng::{gamma_variate, inverse_gaussian_variate, standard_normal, RngStream};
pub use types::{to_log_returns, CalibrationResult, LogReturns, PathSet, Scheme, TimeSeries};
