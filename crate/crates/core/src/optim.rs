//! Derivative-free minimisation (Nelder–Mead) and observed-information
//! standard errors.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Convergence when the simplex spread in `f` falls below this.
    pub f_tol: f64,
    /// and the simplex diameter (infinity norm) falls below this.
    pub x_tol: f64,
    /// Initial simplex edge, relative to `|x0_i|` (absolute when `x0_i` is 0).
    pub step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            f_tol: 1e-10,
            x_tol: 1e-8,
            step: 0.1,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` from `x0`. Non-finite values are treated as `+inf`, so an
/// objective may signal infeasibility by returning `NaN` or `inf`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let mut best = run_simplex(&f, x0, opts, opts.max_evals);
    let mut evals = best.evaluations;
    let mut iterations = best.iterations;
    for _ in 0..opts.restarts {
        if evals >= opts.max_evals || !best.value.is_finite() {
            break;
        }
        let prev = best.value;
        let next = run_simplex(&f, &best.x, opts, opts.max_evals - evals);
        evals += next.evaluations;
        iterations += next.iterations;
        let improved = next.value < prev - opts.f_tol * (1.0 + prev.abs());
        if next.value <= best.value {
            best = next;
        }
        if !improved {
            break;
        }
    }
    best.evaluations = evals;
    best.iterations = iterations;
    best
}

fn run_simplex(f: &impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions, budget: usize) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    // Dimension-adaptive coefficients (Gao & Han).
    let alpha = 1.0;
    let gamma = 1.0 + 2.0 / nf;
    let rho = 0.75 - 1.0 / (2.0 * nf);
    let sigma = 1.0 - 1.0 / nf;

    let mut evals = 0;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(x))
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let h = if v[i] != 0.0 { opts.step * v[i].abs() } else { opts.step };
        v[i] += h;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_spread = (values[n] - values[0]).abs();
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[0].is_finite() && f_spread <= opts.f_tol * (1.0 + values[0].abs()) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        for i in 1..=n {
            let v: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            values[i] = eval(&v, &mut evals);
            simplex[i] = v;
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations: evals,
        converged,
    }
}

/// Runs [`nelder_mead`] from each start and keeps the lowest minimum.
pub fn multi_start(f: impl Fn(&[f64]) -> f64, starts: &[Vec<f64>], opts: &NelderMeadOptions) -> Option<Minimum> {
    let mut best: Option<Minimum> = None;
    for s in starts {
        let m = nelder_mead(&f, s, opts);
        let better = match &best {
            None => true,
            Some(b) => m.value < b.value,
        };
        if better {
            best = Some(m);
        }
    }
    best
}

/// Central-difference Hessian of `f` at `x`. Returns `None` if any probe is
/// not finite.
pub fn hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let mut at = x.to_vec();
    let probe = |at: &mut Vec<f64>, di: (usize, f64), dj: Option<(usize, f64)>| {
        at[di.0] += di.1;
        if let Some((j, s)) = dj {
            at[j] += s;
        }
        let v = f(at);
        at[di.0] -= di.1;
        if let Some((j, s)) = dj {
            at[j] -= s;
        }
        v
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = probe(&mut at, (i, h[i]), None);
        let fm = probe(&mut at, (i, -h[i]), None);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = probe(&mut at, (i, h[i]), Some((j, h[j])));
            let fpm = probe(&mut at, (i, h[i]), Some((j, -h[j])));
            let fmp = probe(&mut at, (i, -h[i]), Some((j, h[j])));
            let fmm = probe(&mut at, (i, -h[i]), Some((j, -h[j])));
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if hess.iter().all(|v| v.is_finite()) {
        Some(hess)
    } else {
        None
    }
}

/// Standard errors `sqrt(diag(H^-1))` where `H` is the Hessian of the
/// negative log-likelihood at its minimum. `None` when `H` is not positive
/// definite.
pub fn observed_info_stderr(neg_log_lik: impl Fn(&[f64]) -> f64, x: &[f64]) -> Option<Vec<f64>> {
    let h = hessian(neg_log_lik, x)?;
    let chol = h.cholesky()?;
    let inv = chol.inverse();
    let se: Vec<f64> = (0..x.len()).map(|i| inv[(i, i)].sqrt()).collect();
    se.iter().all(|v| v.is_finite()).then_some(se)
}

/// Maximises a log-likelihood over unconstrained coordinates from several
/// starts. The first start is the reported initial guess; its log-likelihood
/// is returned alongside the best minimum found.
pub(crate) fn maximize(
    log_lik: impl Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    opts: &NelderMeadOptions,
) -> crate::Result<(Minimum, f64)> {
    let neg = |u: &[f64]| -log_lik(u);
    let initial = log_lik(&starts[0]);
    let best = multi_start(neg, starts, opts)
        .filter(|m| m.value.is_finite())
        .ok_or_else(|| crate::Error::OptimizerFailed("no start produced a finite likelihood".into()))?;
    Ok((best, initial))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn quadratic_five_dims_with_infeasible_region() {
        let f = |x: &[f64]| {
            if x[0] < -0.5 {
                return f64::NAN;
            }
            x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - i as f64).powi(2)).sum()
        };
        let m = nelder_mead(f, &[1.0; 5], &NelderMeadOptions::default());
        for (i, v) in m.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-4, "{:?}", m.x);
        }
    }

    #[test]
    fn multi_start_picks_global() {
        let f = |x: &[f64]| (x[0] * x[0] - 4.0).powi(2) + x[0];
        let m = multi_start(f, &[vec![1.5], vec![-1.5]], &NelderMeadOptions::default()).unwrap();
        assert!(m.x[0] < 0.0);
    }

    #[test]
    fn gaussian_stderr() {
        // Negative log-likelihood of N(mu, 1) for 100 observations at mean 0:
        // curvature 100, so se(mu) = 0.1.
        let f = |x: &[f64]| 50.0 * x[0] * x[0];
        let se = observed_info_stderr(f, &[0.0]).unwrap();
        assert!((se[0] - 0.1).abs() < 1e-6);
        assert!(observed_info_stderr(|x: &[f64]| -x[0] * x[0], &[0.0]).is_none());
    }
}
