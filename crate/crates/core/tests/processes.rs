//! Simulator-versus-density checks, CIR transition conventions and
//! determinism across every family.

use stochkit::garch::{self, NgarchParams};
use stochkit::gbm::{self, GbmParams};
use stochkit::jumps::{self, JumpGbmParams};
use stochkit::meanrev::{self, CirParams, ExpVasicekParams, VasicekParams};
use stochkit::meanrev_jumps::{self, JumpVasicekParams};
use stochkit::quad::{integrate, integrate_to_inf};
use stochkit::specfun::{ln_bessel_i_scaled, normal_cdf};
use stochkit::stats::{ks_test, mean, variance};
use stochkit::subordinated::{self, NigParams, VgParams};
use stochkit::{PathSet, RngStream, Scheme};

const ALPHA: f64 = 0.001;

/// Model CDF at each sorted sample point, by integrating `pdf` between
/// neighbours and starting from a point far in the left tail.
fn cdf_at_sorted(sorted: &[f64], left: f64, pdf: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut prev = left;
    sorted
        .iter()
        .map(|&x| {
            if x > prev {
                acc += integrate(&pdf, prev, x, 1e-13, 1e-10).unwrap().value;
                prev = x;
            }
            acc
        })
        .collect()
}

/// KS statistic when the model CDF is only available by quadrature.
fn ks_by_quadrature(sample: &[f64], left: f64, pdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let s = stochkit::stats::sorted(sample);
    let f = cdf_at_sorted(&s, left, pdf);
    let n = s.len() as f64;
    let d = f.iter().enumerate().fold(0.0f64, |d, (i, &fi)| {
        d.max((i + 1) as f64 / n - fi).max(fi - i as f64 / n)
    });
    (d, stochkit::stats::ks_critical(s.len(), ALPHA))
}

#[test]
fn gbm_log_increments_are_exact() {
    let p = GbmParams::new(0.1, 0.3).unwrap();
    let dt = 1.0 / 52.0;
    let paths = gbm::simulate(&p, 1.0, 1, 1_000_000, dt, &RngStream::new(21, 0)).unwrap();
    let r: Vec<f64> = paths.terminal().iter().map(|s| s.ln()).collect();
    let (m, v) = ((0.1 - 0.045) * dt, 0.09 * dt);
    let ks = ks_test(&r, |x| normal_cdf((x - m) / v.sqrt()), ALPHA);
    assert!(!ks.reject, "{ks:?}");
}

#[test]
fn jump_returns_follow_the_mixture() {
    let p = JumpGbmParams::new(0.05, 0.2, 20.0, -0.03, 0.05).unwrap();
    let dt = 1.0 / 252.0;
    let steps = jumps::simulate_steps(&p, dt, 200_000, &mut RngStream::new(22, 0)).unwrap();
    let r: Vec<f64> = steps.iter().map(|s| s.log_return).collect();
    let ks = ks_test(&r, |x| jumps::mixture_cdf(x, &p, dt).unwrap(), ALPHA);
    assert!(!ks.reject, "{ks:?}");

    let j: Vec<f64> = steps.iter().map(|s| s.compensated_jump).collect();
    let se = (variance(&j, true) / j.len() as f64).sqrt();
    assert!(mean(&j).abs() < 3.0 * se, "compensated mean {} (se {se})", mean(&j));
}

#[test]
fn vg_and_nig_increments_follow_their_densities() {
    let dt = 1.0 / 252.0;
    let vg = VgParams::new(0.05, -0.1, 0.2, 0.002).unwrap();
    let x = subordinated::vg_increments(&vg, dt, 50_000, &mut RngStream::new(23, 0)).unwrap();
    let (d, crit) = ks_by_quadrature(&x, -1.0, |y| subordinated::vg_density(y, &vg, dt).unwrap());
    assert!(d < crit, "VG D = {d}, critical {crit}");

    let nig = NigParams::new(60.0, -8.0, 0.9 * 252.0 * 0.04 / 60.0, 0.05).unwrap();
    let x = subordinated::nig_increments(&nig, dt, 50_000, &mut RngStream::new(24, 0)).unwrap();
    let (d, crit) = ks_by_quadrature(&x, -1.0, |y| subordinated::nig_density(y, &nig, dt).unwrap());
    assert!(d < crit, "NIG D = {d}, critical {crit}");
}

#[test]
fn vasicek_increments_are_exact() {
    let p = VasicekParams::new(3.0, 0.05, 0.02).unwrap();
    let dt = 1.0 / 12.0;
    let x0 = 0.08;
    let a = p.ar1(dt);
    let paths = meanrev::vasicek_simulate(&p, x0, 1, 500_000, dt, &RngStream::new(25, 0)).unwrap();
    let ks = ks_test(&paths.terminal(), |x| normal_cdf((x - a.c - a.b * x0) / a.delta), ALPHA);
    assert!(!ks.reject, "{ks:?}");
}

#[test]
fn vasicek_ols_equals_mle() {
    let p = VasicekParams::new(1.5, 0.04, 0.01).unwrap();
    let dt = 1.0 / 52.0;
    for seed in 0..5 {
        let x = meanrev::vasicek_simulate(&p, 0.02, 500, 1, dt, &RngStream::new(26, seed)).unwrap().path(0).to_vec();
        let ols = meanrev::vasicek_calibrate_ols(&x, dt).unwrap().params;
        let mle = meanrev::vasicek_calibrate_mle(&x, dt).unwrap().params;
        for (a, b) in [(ols.alpha, mle.alpha), (ols.theta, mle.theta), (ols.sigma, mle.sigma)] {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{ols:?} vs {mle:?}");
        }
    }
}

#[test]
fn cir_exact_sampler_matches_transition() {
    let p = CirParams::new(2.0, 0.05, 0.15).unwrap();
    for (i, (dt, x0)) in [(1.0 / 252.0, 0.05), (0.25, 0.01), (1.0, 0.12)].into_iter().enumerate() {
        let paths = meanrev::cir_simulate(&p, x0, 1, 50_000, dt, &RngStream::new(27, i as u64), Scheme::Exact).unwrap();
        let ks = ks_test(&paths.terminal(), |x| meanrev::cir_transition_cdf(x, x0, &p, dt).unwrap(), ALPHA);
        assert!(!ks.reject, "dt {dt}, x0 {x0}: {ks:?}");
    }
}

#[test]
fn cir_euler_agrees_with_exact_in_mean() {
    let p = CirParams::new(1.0, 0.06, 0.1).unwrap();
    let dt = 0.05;
    let run = |scheme, stream| {
        let ps = meanrev::cir_simulate(&p, 0.03, 40, 100_000, dt, &RngStream::new(28, stream), scheme).unwrap();
        let t = ps.terminal();
        (mean(&t), variance(&t, true) / t.len() as f64)
    };
    let (m_exact, v_exact) = run(Scheme::Exact, 0);
    let (m_euler, v_euler) = run(Scheme::Euler, 1);
    let se = (v_exact + v_euler).sqrt();
    assert!((m_exact - m_euler).abs() < 3.0 * se, "{m_exact} vs {m_euler}, se {se}");
    assert!((m_exact - p.mean(0.03, 2.0)).abs() < 3.0 * v_exact.sqrt());
}

/// Transition density with the decay factor on the forward observation
/// instead of the starting one.
fn cir_swapped_pdf(x_next: f64, x_prev: f64, p: &CirParams, dt: f64) -> f64 {
    if x_next <= 0.0 {
        return 0.0;
    }
    let t = p.transition(dt);
    let q = 2.0 * p.alpha * p.theta / (p.sigma * p.sigma) - 1.0;
    let u = t.c * x_next * (-p.alpha * dt).exp();
    let v = t.c * x_prev;
    let z = 2.0 * (u * v).sqrt();
    let d = u.sqrt() - v.sqrt();
    (t.c.ln() - d * d + 0.5 * q * (v / u).ln() + ln_bessel_i_scaled(q, z).unwrap()).exp()
}

#[test]
fn cir_decay_on_forward_observation_is_not_a_density() {
    let p = CirParams::new(0.8, 0.05, 0.1).unwrap();
    let (dt, x0) = (0.5, 0.04);
    let standard = integrate_to_inf(&|x| meanrev::cir_transition_pdf(x, x0, &p, dt).unwrap_or(0.0), 0.0, 1e-12, 1e-10).unwrap();
    assert!((standard.value - 1.0).abs() < 1e-7, "{}", standard.value);
    let swapped = integrate_to_inf(&|x| cir_swapped_pdf(x, x0, &p, dt), 0.0, 1e-12, 1e-10).unwrap();
    assert!((swapped.value - 1.0).abs() > 0.1, "swapped mass {}", swapped.value);
}

#[test]
fn jump_vasicek_one_step_matches_density() {
    let p = JumpVasicekParams::single(4.0, 1.0, 0.3, 1.0, 0.2, 0.05).unwrap();
    let dt = 0.05 / p.lambda_up;
    let x0 = 1.1;
    let paths = meanrev_jumps::simulate(&p, x0, 1, 100_000, dt, &RngStream::new(29, 0)).unwrap();
    let (d, crit) = ks_by_quadrature(&paths.terminal(), x0 - 1.0, |y| meanrev_jumps::transition_pdf(y, x0, &p, dt).unwrap());
    // the density keeps at most one jump per step; allow for the O((lambda dt)^2) gap
    assert!(d < crit + 0.5 * (p.lambda_up * dt).powi(2), "D = {d}, critical {crit}");
}

#[test]
fn exponential_jump_vasicek_is_positive_and_recovers_log_parameters() {
    let p = JumpVasicekParams::single(5.0, 0.5, 0.2, 10.0, 0.1, 0.03).unwrap();
    let dt = 1.0 / 252.0;
    let paths = meanrev_jumps::simulate_exponential(&p, 1.5, 5000, 1, dt, &RngStream::new(30, 0)).unwrap();
    assert!(paths.values.iter().all(|&x| x > 0.0));
    let logs: Vec<f64> = paths.path(0).iter().map(|x| x.ln()).collect();
    let fit = meanrev_jumps::calibrate(&logs, dt, false).unwrap();
    assert!((fit.params.theta - p.theta).abs() < 0.25, "{:?}", fit.params);
}

#[test]
fn simulators_are_deterministic() {
    let rng = RngStream::new(31, 4);
    let dt = 1.0 / 252.0;
    let same = |a: &PathSet, b: &PathSet| a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits());
    let runs: Vec<Box<dyn Fn() -> PathSet>> = vec![
        Box::new(|| gbm::simulate(&GbmParams::new(0.1, 0.2).unwrap(), 1.0, 20, 5, dt, &rng).unwrap()),
        Box::new(|| jumps::simulate(&JumpGbmParams::new(0.1, 0.2, 5.0, 0.0, 0.1).unwrap(), 1.0, 20, 5, dt, &rng).unwrap()),
        Box::new(|| {
            let p = NgarchParams { mu: 0.05, omega: 1e-6, alpha: 0.85, beta: 0.05, gamma: 0.5, sigma0_sq: 1e-4 };
            garch::simulate(&p, 1.0, 20, 5, dt, &rng).unwrap().paths
        }),
        Box::new(|| subordinated::vg_simulate(&VgParams::new(0.0, -0.1, 0.2, 0.01).unwrap(), 1.0, 20, 5, dt, &rng).unwrap()),
        Box::new(|| subordinated::nig_simulate(&NigParams::new(50.0, -5.0, 0.3, 0.0).unwrap(), 1.0, 20, 5, dt, &rng).unwrap()),
        Box::new(|| meanrev::vasicek_simulate(&VasicekParams::new(2.0, 0.05, 0.01).unwrap(), 0.04, 20, 5, dt, &rng).unwrap()),
        Box::new(|| {
            let p = ExpVasicekParams::from_log(&VasicekParams::new(2.0, 0.0, 0.3).unwrap());
            meanrev::exp_vasicek_simulate(&p, 1.0, 20, 5, dt, &rng).unwrap()
        }),
        Box::new(|| meanrev::cir_simulate(&CirParams::new(2.0, 0.05, 0.1).unwrap(), 0.04, 20, 5, dt, &rng, Scheme::Exact).unwrap()),
        Box::new(|| meanrev::cir_simulate(&CirParams::new(2.0, 0.05, 0.1).unwrap(), 0.04, 20, 5, dt, &rng, Scheme::Euler).unwrap()),
        Box::new(|| {
            let p = JumpVasicekParams::single(2.0, 0.05, 0.01, 10.0, 0.01, 0.005).unwrap();
            meanrev_jumps::simulate(&p, 0.04, 20, 5, dt, &rng).unwrap()
        }),
    ];
    for (i, run) in runs.iter().enumerate() {
        let (a, b) = (run(), run());
        assert_eq!(a.values.len(), 5 * 21, "family {i}");
        assert!(same(&a, &b), "family {i} is not reproducible");
        assert!(a.paths().all(|p| p[0] == a.values[0]), "family {i} start");
    }
}
