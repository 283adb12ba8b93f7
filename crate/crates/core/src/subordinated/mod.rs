//! Brownian motion time-changed by a subordinator.

mod nig;
mod vg;

pub use nig::*;
pub use vg::*;
