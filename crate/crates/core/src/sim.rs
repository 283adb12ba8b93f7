use crate::rng::RngStream;
use crate::types::{PathSet, Scheme};

/// Level paths `s0 * exp(cumulative log-returns)`; `step(rng, i)` draws the
/// log-return of step `i` from path `p`'s own child stream.
pub(crate) fn log_level_paths(
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
    scheme: Scheme,
    mut step: impl FnMut(&mut RngStream, usize) -> f64,
) -> PathSet {
    PathSet::from_fn(n_paths, n_steps, dt, rng.seed(), scheme, |p, row| {
        let mut r = rng.child(p as u64);
        let ln_s0 = s0.ln();
        let mut acc = 0.0;
        row[0] = s0;
        for (i, v) in row.iter_mut().enumerate().skip(1) {
            acc += step(&mut r, i);
            *v = (ln_s0 + acc).exp();
        }
    })
}

/// Paths of a Markov state recursion `x_i = next(rng, x_{i-1}, i)`.
pub(crate) fn state_paths(
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    dt: f64,
    rng: &RngStream,
    scheme: Scheme,
    mut next: impl FnMut(&mut RngStream, f64, usize) -> f64,
) -> PathSet {
    PathSet::from_fn(n_paths, n_steps, dt, rng.seed(), scheme, |p, row| {
        let mut r = rng.child(p as u64);
        row[0] = x0;
        for i in 1..=n_steps {
            row[i] = next(&mut r, row[i - 1], i);
        }
    })
}

pub(crate) fn check_grid(n_paths: usize, dt: f64) -> crate::Result<()> {
    crate::error::ensure_param(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    crate::error::ensure_param(n_paths > 0, || "n_paths must be positive".into())
}
