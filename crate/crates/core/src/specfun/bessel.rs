//! Modified Bessel functions `I_nu` and `K_nu` of real order, computed in log
//! space so that neither large orders nor large arguments overflow.
//!
//! For `nu` up to [`DEBYE_ORDER`] both functions come from one pass of the
//! classic Temme/Steed scheme:
//!
//! * `f = I'_nu / I_nu` from the first continued fraction, then downward
//!   recurrence of `I` to the fractional order `mu = nu - round(nu)`;
//! * `K_mu`, `K_{mu+1}` from Temme's series when `x < 2`, or from Steed's
//!   second continued fraction when `x >= 2` (crossover at 2);
//! * `I_mu` from the Wronskian, `K_nu` by upward recurrence (stable for K).
//!
//! Orders above [`DEBYE_ORDER`] use the uniform (Debye) asymptotic expansion
//! for `K`. Large arguments for `I` use the Hankel expansion.

use std::f64::consts::PI;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 200_000;
const XMIN: f64 = 2.0;
const RESCALE: f64 = 1e250;
const LN_RESCALE: f64 = 575.646_273_248_511_4; // ln(1e250)

/// Orders above this use the Debye expansion for `ln K`.
pub const DEBYE_ORDER: f64 = 200.0;

// Taylor coefficients of 1/Gamma(z) = sum_k C[k-1] z^k (Abramowitz & Stegun 6.1.34).
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `1 / Gamma(1 + mu)` for `|mu| <= 1/2`.
pub(crate) fn rgamma1p(mu: f64) -> f64 {
    RGAMMA.iter().rev().fold(0.0, |acc, &c| acc * mu + c)
}

/// Temme's auxiliary quantities: (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)).
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu) = -sum_{k even} c_k mu^(k-2)
    // gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2      =  sum_{k odd}  c_k mu^(k-1)
    let mu2 = mu * mu;
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    for (i, &c) in RGAMMA.iter().enumerate().rev() {
        let k = i + 1;
        if k % 2 == 0 {
            gam1 = gam1 * mu2 + c;
        } else {
            gam2 = gam2 * mu2 + c;
        }
    }
    (-gam1, gam2, rgamma1p(mu), rgamma1p(-mu))
}

/// `K_mu(x)` and `K_{mu+1}(x)` for `|mu| <= 1/2`, together with the log of the
/// factor they were divided by (`-x` when scaled by `e^x`, else 0).
fn k_base(mu: f64, x: f64) -> (f64, f64, f64) {
    let xi = 1.0 / x;
    let mu2 = mu * mu;
    if x < XMIN {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - fi * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum, sum1 * 2.0 * xi, 0.0)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let kmu = (PI / (2.0 * x)).sqrt() / s;
        let k1 = kmu * (mu + x + 0.5 - h) * xi;
        (kmu, k1, -x)
    }
}

/// `(ln(e^{-x} I_nu(x)), ln(e^x K_nu(x)))` for `nu >= 0`, `x > 0`.
pub(crate) fn ln_ik_scaled(nu: f64, x: f64) -> (f64, f64) {
    debug_assert!(nu >= 0.0 && x > 0.0);
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // CF1: h = I'_nu / I_nu.
    let mut h = (nu * xi).max(1e-300);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    for _ in 0..MAX_ITER {
        b += xi2;
        d = 1.0 / (b + d);
        c = b + 1.0 / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }

    // Downward recurrence of (unnormalised) I from nu to mu.
    let mut ril = 1.0_f64;
    let mut ripl = h * ril;
    let mut ln_scale_i = 0.0;
    let mut fact = nu * xi;
    for _ in 0..nl {
        let ritemp = fact * ril + ripl;
        fact -= xi;
        ripl = fact * ritemp + ril;
        ril = ritemp;
        if ril.abs() > RESCALE {
            ril /= RESCALE;
            ripl /= RESCALE;
            ln_scale_i += LN_RESCALE;
        }
    }
    let f = ripl / ril;

    let (mut kmu, mut k1, ln_kscale) = k_base(mu, x);
    let kmup = mu * xi * kmu - k1;
    let imu = xi / (f * kmu - kmup);
    // I_nu = I_mu * ril_start / ril_end
    let ln_i = imu.ln() - (ln_kscale + x) - (ril.abs().ln() + ln_scale_i);

    let mut ln_scale_k = 0.0;
    for i in 1..=nl {
        let ktemp = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = ktemp;
        if k1 > RESCALE {
            kmu /= RESCALE;
            k1 /= RESCALE;
            ln_scale_k += LN_RESCALE;
        }
    }
    let ln_k = kmu.ln() + ln_scale_k + (ln_kscale + x);
    (ln_i, ln_k)
}

/// Debye uniform expansion of `ln(e^x K_nu(x))` for large `nu`.
pub(crate) fn ln_k_debye_scaled(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let r = (1.0 + z * z).sqrt();
    let t = 1.0 / r;
    // eta - z, with r - z written without cancellation.
    let eta_minus_z = 1.0 / (r + z) + (z / (1.0 + r)).ln();
    let t2 = t * t;
    let u1 = t * (3.0 - 5.0 * t2) / 24.0;
    let u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
    let u3 = t * t2
        * (30375.0 - 369_603.0 * t2 + 765_765.0 * t2 * t2 - 425_425.0 * t2 * t2 * t2)
        / 414_720.0;
    let t4 = t2 * t2;
    let u4 = t4
        * (4_465_125.0 - 94_121_676.0 * t2 + 349_922_430.0 * t4 - 446_185_740.0 * t4 * t2
            + 185_910_725.0 * t4 * t4)
        / 39_813_120.0;
    let inv = 1.0 / nu;
    let series = 1.0 - u1 * inv + u2 * inv * inv - u3 * inv.powi(3) + u4 * inv.powi(4);
    0.5 * (PI / (2.0 * nu)).ln() - nu * eta_minus_z - 0.25 * (1.0 + z * z).ln() + series.ln()
}

/// `ln(e^{-x} I_nu(x))` by the Hankel large-argument expansion; `None` when
/// the series does not reach full precision.
fn ln_i_hankel_scaled(nu: f64, x: f64) -> Option<f64> {
    let m = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let fk = k as f64;
        let odd = 2.0 * fk - 1.0;
        term *= -(m - odd * odd) / (fk * 8.0 * x);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Some(-0.5 * (2.0 * PI * x).ln() + sum.ln());
        }
        if k > 2 && term.abs() > 1.0 {
            return None;
        }
    }
    None
}

/// `ln(e^x K_nu(x))`.
pub(crate) fn ln_k_scaled(nu: f64, x: f64) -> f64 {
    let nu = nu.abs();
    if nu > DEBYE_ORDER {
        ln_k_debye_scaled(nu, x)
    } else {
        ln_k_recurrence_scaled(nu, x)
    }
}

/// `ln(e^x K_nu(x))` by upward recurrence from the base pair, without the
/// `I` continued fraction that slows down at large `x`.
fn ln_k_recurrence_scaled(nu: f64, x: f64) -> f64 {
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let xi2 = 2.0 / x;
    let (mut kmu, mut k1, ln_kscale) = k_base(mu, x);
    let mut ln_scale_k = 0.0;
    for i in 1..=nl {
        let ktemp = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = ktemp;
        if k1 > RESCALE {
            kmu /= RESCALE;
            k1 /= RESCALE;
            ln_scale_k += LN_RESCALE;
        }
    }
    kmu.ln() + ln_scale_k + (ln_kscale + x)
}

/// `ln(e^{-x} I_nu(x))` for `nu >= 0`, `x > 0`.
pub(crate) fn ln_i_scaled(nu: f64, x: f64) -> f64 {
    if x > 1000.0 && x > 2.0 * nu * nu {
        if let Some(v) = ln_i_hankel_scaled(nu, x) {
            return v;
        }
    }
    ln_ik_scaled(nu, x).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_gamma_series() {
        for i in 0..=40 {
            let mu = -0.5 + i as f64 / 40.0;
            let exact = 1.0 / statrs::function::gamma::gamma(1.0 + mu);
            assert!((rgamma1p(mu) - exact).abs() < 5e-15, "mu={mu}");
        }
    }

    #[test]
    fn known_values() {
        let ln_ik = |nu: f64, x: f64| {
            let (i, k) = ln_ik_scaled(nu, x);
            (i + x, k - x)
        };
        let (li0, lk0) = ln_ik(0.0, 1.0);
        assert!((li0.exp() - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((lk0.exp() - 0.421_024_438_240_708_34).abs() < 1e-14);
        let (li1, lk1) = ln_ik(1.0, 1.0);
        assert!((li1.exp() - 0.565_159_103_992_485_1).abs() < 1e-14);
        assert!((lk1.exp() - 0.601_907_230_197_234_6).abs() < 1e-14);
        // Steed branch.
        let (li, lk) = ln_ik(0.0, 5.0);
        assert!((li.exp() / 27.239_871_823_604_44 - 1.0).abs() < 1e-13);
        assert!((lk.exp() / 0.003_691_098_334_042_594 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn debye_matches_recurrence_at_crossover() {
        for &x in &[0.5, 10.0, 150.0, 400.0, 2000.0] {
            let a = ln_k_debye_scaled(DEBYE_ORDER + 0.3, x) - x;
            let b = ln_ik_scaled(DEBYE_ORDER + 0.3, x).1 - x;
            assert!(((a - b) / b.abs().max(1.0)).abs() < 1e-12, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn k_recurrence_matches_joint_evaluation() {
        for &nu in &[0.0, 0.3, 1.0, 2.5, 7.2] {
            for &x in &[1e-3, 0.7, 2.0, 15.0, 300.0] {
                let a = ln_k_recurrence_scaled(nu, x);
                let b = ln_ik_scaled(nu, x).1;
                assert!((a - b).abs() < 1e-13 * b.abs().max(1.0), "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn hankel_matches_cf1() {
        for &(nu, x) in &[(0.0, 1500.0), (3.7, 2500.0), (10.0, 5000.0)] {
            let a = ln_i_hankel_scaled(nu, x).unwrap();
            let b = ln_ik_scaled(nu, x).0;
            assert!((a - b).abs() < 1e-12, "nu={nu} x={x}");
        }
    }
}
