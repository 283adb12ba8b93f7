//! Mean-reverting short-rate style processes: Vasicek, exponential Vasicek
//! and Cox–Ingersoll–Ross.

mod cir;
mod vasicek;

pub use cir::*;
pub use vasicek::*;
