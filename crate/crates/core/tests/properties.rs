use proptest::prelude::*;
use stochkit::diagnostics::{acf, adf_test, clean_outliers};
use stochkit::evt::{es_estimate, gpd_cdf, tail_cdf, var_estimate, GpdParams, TailFit};
use stochkit::meanrev::{params_from_ar1, VasicekParams};
use stochkit::{to_log_returns, TimeSeries};

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

/// A random walk with drift, which keeps the ADF regression well posed.
fn walk(steps: &[f64]) -> Vec<f64> {
    steps
        .iter()
        .scan(0.0, |s, d| {
            *s += d + 0.01;
            Some(*s)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_returns_invert_cumulative_exponentiation(r in series(2..200), s0 in 0.01f64..1e4) {
        let mut levels = vec![s0];
        for x in &r {
            levels.push(levels.last().unwrap() * x.exp());
        }
        let back = to_log_returns(&TimeSeries::regular(levels, 1.0 / 252.0).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(&r) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn acf_is_affine_invariant(x in series(30..300), a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0], b in -100.0f64..100.0) {
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (rx, ry) = (acf(&x, 10).unwrap(), acf(&y, 10).unwrap());
        for (p, q) in rx.iter().zip(&ry) {
            prop_assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn adf_is_affine_invariant(steps in series(60..300), a in 0.1f64..10.0, b in -100.0f64..100.0) {
        let x = walk(&steps);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (rx, ry) = (adf_test(&x, 1).unwrap(), adf_test(&y, 1).unwrap());
        prop_assert!((rx.statistic - ry.statistic).abs() < 1e-9 * rx.statistic.abs().max(1.0));
        prop_assert_eq!(rx.reject_5pct, rx.statistic < rx.critical_5pct);
        prop_assert_eq!(rx.reject_1pct, rx.statistic < rx.critical_1pct);
        prop_assert!(!rx.reject_1pct || rx.reject_5pct);
    }

    #[test]
    fn outlier_cleaning_reaches_a_fixpoint(
        steps in series(30..150),
        spikes in prop::collection::vec((0usize..150, 5.0f64..50.0), 0..6),
    ) {
        let mut x = walk(&steps);
        for (i, h) in spikes {
            let j = i % x.len();
            x[j] += h;
        }
        let n = x.len();
        let mut s = TimeSeries::regular(x, 1.0).unwrap();
        let mut settled = false;
        for _ in 0..n {
            if s.len() < 10 {
                settled = true;
                break;
            }
            let next = clean_outliers(&s).unwrap();
            if next.len() == s.len() {
                prop_assert_eq!(next.values(), s.values());
                settled = true;
                break;
            }
            s = next;
        }
        prop_assert!(settled);
    }

    #[test]
    fn vasicek_mapping_round_trips(alpha in 0.05f64..50.0, theta in -1.0f64..1.0, sigma in 1e-3f64..2.0, dt in 1e-3f64..0.1) {
        let p = VasicekParams::new(alpha, theta, sigma).unwrap();
        let q = params_from_ar1(p.ar1(dt), dt).unwrap();
        prop_assert!((q.alpha - alpha).abs() <= 1e-12 * alpha.max(1.0) / (alpha * dt).min(1.0));
        prop_assert!((q.theta - theta).abs() <= 1e-12 * theta.abs().max(1.0) / (alpha * dt).min(1.0));
        prop_assert!((q.sigma - sigma).abs() <= 1e-12 * sigma / (alpha * dt).min(1.0));
    }

    #[test]
    fn tail_estimates_are_ordered(
        xi in -0.5f64..0.9,
        beta in 0.1f64..5.0,
        u in -2.0f64..10.0,
        n_exceed in 20usize..200,
        frac in 0.01f64..0.99,
    ) {
        let n = 1000;
        let fit = TailFit { gpd: GpdParams::new(xi, beta).unwrap(), threshold: u, n, n_exceed };
        let p = frac * n_exceed as f64 / n as f64;
        let var = var_estimate(p, &fit).unwrap();
        let es = es_estimate(p, &fit).unwrap();
        prop_assert!(var >= u);
        prop_assert!(es >= var);
        let back = tail_cdf(var, &fit).unwrap();
        prop_assert!((1.0 - back - p).abs() < 1e-12, "{} vs {p}", 1.0 - back);
    }

    #[test]
    fn gpd_cdf_continuous_at_zero_shape(y in 0.0f64..50.0, beta in 0.1f64..5.0) {
        let zero = gpd_cdf(y, &GpdParams::new(0.0, beta).unwrap()).unwrap();
        for xi in [1e-8, -1e-8] {
            let near = gpd_cdf(y, &GpdParams::new(xi, beta).unwrap()).unwrap();
            prop_assert!((near - zero).abs() < 1e-8);
        }
    }
}
