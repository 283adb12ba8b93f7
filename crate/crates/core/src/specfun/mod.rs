//! Special functions used by the analytic densities.
//!
//! Gamma, error-function and incomplete-gamma primitives come from `statrs`;
//! the Bessel functions and distribution helpers are implemented here.

mod bessel;

use std::f64::consts::{PI, SQRT_2};

use statrs::function::{erf, gamma};

use crate::error::{Error, Result};

fn domain(msg: String) -> Error {
    Error::DomainError(msg)
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(gamma::ln_gamma(x))
}

/// `Gamma(x)` for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(gamma::gamma(x))
}

fn check_k(x: f64) -> Result<()> {
    if !(x > 0.0) || x.is_nan() {
        return Err(domain(format!("bessel_k requires x > 0, got {x}")));
    }
    Ok(())
}

/// `ln K_eta(x)`. Never overflows or underflows for finite inputs.
pub fn ln_bessel_k(eta: f64, x: f64) -> Result<f64> {
    check_k(x)?;
    if !eta.is_finite() {
        return Err(domain(format!("bessel_k order must be finite, got {eta}")));
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(bessel::ln_k_scaled(eta, x) - x)
}

/// `ln(e^x K_eta(x))`, accurate for large `x`.
pub fn ln_bessel_k_scaled(eta: f64, x: f64) -> Result<f64> {
    check_k(x)?;
    if !eta.is_finite() || x.is_infinite() {
        return Err(domain(format!("bessel_k needs finite order and argument, got ({eta}, {x})")));
    }
    Ok(bessel::ln_k_scaled(eta, x))
}

/// Modified Bessel function of the second kind, `K_eta(x)`, for real order.
pub fn bessel_k(eta: f64, x: f64) -> Result<f64> {
    ln_bessel_k(eta, x).map(f64::exp)
}

/// `e^x K_eta(x)`.
pub fn bessel_k_scaled(eta: f64, x: f64) -> Result<f64> {
    ln_bessel_k_scaled(eta, x).map(f64::exp)
}

fn check_i(q: f64, x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(domain(format!("bessel_i requires x >= 0, got {x}")));
    }
    if !(q > -1.0) || !q.is_finite() {
        return Err(domain(format!("bessel_i requires order q > -1, got {q}")));
    }
    Ok(())
}

/// `ln(e^{-x} I_q(x))` for `q > -1`, `x >= 0`.
pub fn ln_bessel_i_scaled(q: f64, x: f64) -> Result<f64> {
    check_i(q, x)?;
    if x == 0.0 {
        return Ok(if q == 0.0 {
            0.0
        } else if q > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
    }
    if x.is_infinite() {
        return Err(domain("bessel_i needs a finite argument".into()));
    }
    if q >= 0.0 {
        return Ok(bessel::ln_i_scaled(q, x));
    }
    // I_{-v} = I_v + (2/pi) sin(pi v) K_v, with 0 < v < 1 both terms are positive.
    let v = -q;
    let (li, lk) = bessel::ln_ik_scaled(v, x);
    let lk = lk - 2.0 * x + (2.0 / PI * (PI * v).sin()).ln();
    let m = li.max(lk);
    Ok(m + ((li - m).exp() + (lk - m).exp()).ln())
}

/// `ln I_q(x)` for `q > -1`, `x >= 0`.
pub fn ln_bessel_i(q: f64, x: f64) -> Result<f64> {
    if x.is_infinite() && x > 0.0 && q > -1.0 {
        return Ok(f64::INFINITY);
    }
    ln_bessel_i_scaled(q, x).map(|l| l + x)
}

/// Modified Bessel function of the first kind, `I_q(x)`.
pub fn bessel_i(q: f64, x: f64) -> Result<f64> {
    ln_bessel_i(q, x).map(f64::exp)
}

/// `e^{-x} I_q(x)`.
pub fn bessel_i_scaled(q: f64, x: f64) -> Result<f64> {
    ln_bessel_i_scaled(q, x).map(f64::exp)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

fn check_prob(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("probability must lie in (0, 1), got {p}")));
    }
    Ok(())
}

pub fn normal_quantile(p: f64) -> Result<f64> {
    check_prob(p)?;
    Ok(-SQRT_2 * erf::erfc_inv(2.0 * p))
}

/// Lower regularised incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma::gamma_lr(a, x)
    }
}

pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

/// `ln` of the central chi-squared density.
fn ln_chi2_pdf(x: f64, dof: f64) -> f64 {
    let h = 0.5 * dof;
    if x == 0.0 {
        return match h.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => -std::f64::consts::LN_2,
            _ => f64::NEG_INFINITY,
        };
    }
    (h - 1.0) * x.ln() - 0.5 * x - h * std::f64::consts::LN_2 - gamma::ln_gamma(h)
}

/// Chi-squared quantile by safeguarded Newton iteration on the CDF.
pub fn chi2_quantile(p: f64, dof: f64) -> Result<f64> {
    check_prob(p)?;
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(domain(format!("chi2_quantile requires dof > 0, got {dof}")));
    }
    // Bracket the root.
    let mut lo = 0.0;
    let mut hi = dof.max(1.0);
    while chi2_cdf(hi, dof) < p {
        lo = hi;
        hi *= 2.0;
    }
    // Wilson–Hilferty start, clamped into the bracket.
    let z = -SQRT_2 * erf::erfc_inv(2.0 * p);
    let c = 2.0 / (9.0 * dof);
    let mut x = dof * (1.0 - c + z * c.sqrt()).powi(3);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = chi2_cdf(x, dof) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = ln_chi2_pdf(x, dof).exp();
        let mut next = x - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn check_ncx2(x: f64, dof: f64, nc: f64) -> Result<()> {
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(domain(format!("dof must be positive, got {dof}")));
    }
    if !(nc >= 0.0) || !nc.is_finite() {
        return Err(domain(format!("noncentrality must be >= 0, got {nc}")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `ln` of the noncentral chi-squared density
/// `1/2 e^{-(x+nc)/2} (x/nc)^{dof/4-1/2} I_{dof/2-1}(sqrt(nc x))`.
pub fn ln_noncentral_chi2_pdf(x: f64, dof: f64, nc: f64) -> Result<f64> {
    check_ncx2(x, dof, nc)?;
    if nc == 0.0 {
        return Ok(ln_chi2_pdf(x, dof));
    }
    if x == 0.0 {
        // Only the first Poisson term survives.
        return Ok(-0.5 * nc + ln_chi2_pdf(0.0, dof));
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let order = 0.5 * dof - 1.0;
    let z = (nc * x).sqrt();
    // -(x + nc)/2 + sqrt(nc x) = -(sqrt(x) - sqrt(nc))^2 / 2
    let ln_is = ln_bessel_i_scaled(order, z)?;
    let gap = x.sqrt() - nc.sqrt();
    Ok(-std::f64::consts::LN_2 - 0.5 * gap * gap + (0.25 * dof - 0.5) * (x / nc).ln() + ln_is)
}

pub fn noncentral_chi2_pdf(x: f64, dof: f64, nc: f64) -> Result<f64> {
    ln_noncentral_chi2_pdf(x, dof, nc).map(f64::exp)
}

/// Noncentral chi-squared CDF as a Poisson mixture of central CDFs.
pub fn noncentral_chi2_cdf(x: f64, dof: f64, nc: f64) -> Result<f64> {
    check_ncx2(x, dof, nc)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if nc == 0.0 {
        return Ok(chi2_cdf(x, dof));
    }
    // Sum outward from the Poisson mode so that the weights never underflow
    // before the mass is exhausted.
    let h = 0.5 * nc;
    let mode = h.floor();
    let ln_w = |j: f64| -h + j * h.ln() - gamma::ln_gamma(j + 1.0);
    let term = |j: f64| ln_w(j).exp() * chi2_cdf(x, dof + 2.0 * j);
    let mut total = term(mode);
    let mut mass = ln_w(mode).exp();
    let mut j = mode + 1.0;
    loop {
        let w = ln_w(j).exp();
        total += w * chi2_cdf(x, dof + 2.0 * j);
        mass += w;
        if w < 1e-17 * mass && j > h {
            break;
        }
        j += 1.0;
    }
    let mut j = mode - 1.0;
    while j >= 0.0 {
        let w = ln_w(j).exp();
        total += w * chi2_cdf(x, dof + 2.0 * j);
        if w < 1e-17 * mass {
            break;
        }
        j -= 1.0;
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).unwrap().abs() < 1e-15);
        assert!((ln_gamma(0.5).unwrap() - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
        assert!(matches!(ln_gamma(0.0), Err(Error::DomainError(_))));
        assert!(ln_gamma(-1.5).is_err());
    }

    #[test]
    fn bessel_k_half_integer_closed_form() {
        let v = bessel_k(0.5, 1.0).unwrap();
        let exact = (PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!(close(v, exact, 1e-14));
        assert!((v - 0.4610685).abs() < 1e-7);
        // K_{3/2}(x) = sqrt(pi/(2x)) e^{-x} (1 + 1/x)
        for &x in &[1e-3, 0.3, 2.0, 7.5, 90.0, 650.0] {
            let exact = (PI / (2.0 * x)).sqrt() * (-x).exp() * (1.0 + 1.0 / x);
            assert!(close(bessel_k(1.5, x).unwrap(), exact, 1e-13), "x={x}");
        }
    }

    // K_eta(x) = 1/2 int_0^inf y^{eta-1} exp(-(x/2)(1/y + y)) dy
    fn k_oracle(eta: f64, x: f64) -> f64 {
        // Substitute y = e^t and integrate over a finite window in t, scaled by e^x.
        let f = |t: f64| 0.5 * (eta * t).exp() * (-(x / 2.0) * ((-t).exp() + t.exp()) + x).exp();
        let w = (200.0 * (1.0 + eta) / x).ln().max(1.0) + 2.0 * eta + 1.0;
        integrate(&f, -w, w, 1e-14, 1e-15).unwrap().value * (-x).exp()
    }

    #[test]
    fn bessel_k_integral_oracle() {
        let v = bessel_k(0.0, 1.0).unwrap();
        assert!((v - 0.4210244).abs() < 1e-7);
        assert!(close(v, k_oracle(0.0, 1.0), 1e-10));
        for i in 0..100 {
            let x = 10f64.powf(-3.0 + 5.5 * i as f64 / 99.0);
            for &eta in &[0.0, 0.3, 1.0, 2.7] {
                let got = bessel_k(eta, x).unwrap();
                let want = k_oracle(eta, x);
                assert!(close(got, want, 1e-9), "eta={eta} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn bessel_k_symmetric_in_order() {
        assert_eq!(bessel_k(-0.7, 2.5).unwrap(), bessel_k(0.7, 2.5).unwrap());
        assert!(bessel_k(0.3, 0.0).is_err());
        assert!(bessel_k(0.3, -1.0).is_err());
    }

    #[test]
    fn bessel_k_scaled_large_argument() {
        // e^x K_v(x) -> sqrt(pi/(2x)) as x grows.
        let x = 5.0e4;
        let s = bessel_k_scaled(0.5, x).unwrap();
        assert!(close(s, (PI / (2.0 * x)).sqrt(), 1e-13));
        assert_eq!(bessel_k(0.5, x).unwrap(), 0.0);
        assert!(ln_bessel_k(0.5, x).unwrap().is_finite());
        assert!(ln_bessel_k(350.0, 1e-3).unwrap().is_finite());
    }

    fn i_series(q: f64, x: f64) -> f64 {
        let mut term = (0.5 * x).powf(q) / gamma::gamma(q + 1.0);
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= 0.25 * x * x / (k * (k + q));
            sum += term;
            if term < 1e-18 * sum {
                return sum;
            }
        }
    }

    #[test]
    fn bessel_i_values() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1.0, 0.0).unwrap(), 0.0);
        assert!((bessel_i(0.0, 1.0).unwrap() - 1.2660659).abs() < 1e-7);
        assert!(bessel_i(-1.0, 1.0).is_err());
        assert!(bessel_i(0.5, -1.0).is_err());
    }

    #[test]
    fn bessel_i_series_oracle() {
        for i in 0..100 {
            let x = 10f64.powf(-3.0 + 4.3 * i as f64 / 99.0);
            for &q in &[-0.6, -0.2, 0.0, 0.4, 1.0, 3.3, 12.0] {
                let got = bessel_i(q, x).unwrap();
                let want = i_series(q, x);
                assert!(close(got, want, 1e-9), "q={q} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn bessel_i_half_order_closed_form() {
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh x, I_{-1/2}(x) = sqrt(2/(pi x)) cosh x
        for &x in &[0.01, 1.0, 10.0, 300.0, 690.0] {
            let c = (2.0 / (PI * x)).sqrt();
            assert!(close(bessel_i(0.5, x).unwrap(), c * x.sinh(), 1e-12), "x={x}");
            assert!(close(bessel_i(-0.5, x).unwrap(), c * x.cosh(), 1e-12), "x={x}");
        }
        let x = 5000.0;
        let s = bessel_i_scaled(0.5, x).unwrap();
        assert!(close(s, (2.0 / (PI * x)).sqrt() * 0.5, 1e-12));
    }

    #[test]
    fn normal_functions() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-6);
        assert!((normal_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        for i in 1..1000 {
            let p = 0.001 + 0.998 * i as f64 / 1000.0;
            let z = normal_quantile(p).unwrap();
            assert!((normal_cdf(z) - p).abs() < 1e-8);
        }
        for i in -309..=309 {
            let z = i as f64 / 100.0;
            assert!((normal_quantile(normal_cdf(z)).unwrap() - z).abs() < 1e-8, "z={z}");
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn chi2_quantile_values() {
        assert!((chi2_quantile(0.5, 2.0).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-9);
        assert!((chi2_quantile(0.975, 1.0).unwrap() - 5.023_886_187_314_888).abs() < 1e-9);
        assert!((chi2_quantile(0.025, 10.0).unwrap() - 3.246_972_780_236_841).abs() < 1e-9);
        for &dof in &[0.5, 1.0, 3.0, 20.0, 251.0] {
            for i in 1..200 {
                let p = 0.001 + 0.998 * i as f64 / 200.0;
                let x = chi2_quantile(p, dof).unwrap();
                assert!((chi2_cdf(x, dof) - p).abs() < 1e-8, "dof={dof} p={p}");
            }
        }
        assert!(chi2_quantile(0.5, 0.0).is_err());
    }

    #[test]
    fn ncx2_reduces_to_central() {
        assert!((noncentral_chi2_pdf(0.0, 2.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let x: f64 = 3.0;
        let central = 0.5 * (-x / 2.0).exp();
        assert!(close(noncentral_chi2_pdf(x, 2.0, 0.0).unwrap(), central, 1e-14));
        // nc -> 0 limit continuity.
        let a = noncentral_chi2_pdf(x, 5.0, 1e-10).unwrap();
        let b = noncentral_chi2_pdf(x, 5.0, 0.0).unwrap();
        assert!(close(a, b, 1e-8));
    }

    #[test]
    fn ncx2_poisson_mixture_oracle() {
        // f(x) = sum_j Pois(j; nc/2) f_chi2(x; dof + 2j)
        for &(x, dof, nc) in &[(1.0f64, 3.0f64, 2.0f64), (7.5, 4.0, 10.0), (40.0, 12.0, 25.0)] {
            let mut s = 0.0;
            for j in 0..400 {
                let jf = j as f64;
                let w = (-0.5 * nc + jf * (0.5 * nc).ln() - gamma::ln_gamma(jf + 1.0)).exp();
                s += w * ln_chi2_pdf(x, dof + 2.0 * jf).exp();
            }
            assert!(close(noncentral_chi2_pdf(x, dof, nc).unwrap(), s, 1e-11));
        }
    }

    #[test]
    fn ncx2_integrates_to_one() {
        for &(dof, nc) in &[(2.5f64, 0.0f64), (3.0, 1.0), (4.0, 10.0), (10.0, 50.0), (50.0, 200.0)] {
            let upper = dof + nc + 30.0 * (2.0 * (dof + 2.0 * nc)).sqrt();
            let f = |x: f64| noncentral_chi2_pdf(x, dof, nc).unwrap();
            let v = integrate(&f, 0.0, upper, 1e-12, 1e-12).unwrap().value;
            assert!((v - 1.0).abs() < 1e-7, "dof={dof} nc={nc}: {v}");
            let c = noncentral_chi2_cdf(0.5 * upper, dof, nc).unwrap();
            let q = integrate(&f, 0.0, 0.5 * upper, 1e-12, 1e-12).unwrap().value;
            assert!((c - q).abs() < 1e-8);
        }
    }

    #[test]
    fn ncx2_tail_decreases() {
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let x = 30.0 + 10.0 * i as f64;
            let v = noncentral_chi2_pdf(x, 4.0, 5.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-60);
        assert!(noncentral_chi2_pdf(-1.0, 4.0, 5.0).is_err());
    }
}
