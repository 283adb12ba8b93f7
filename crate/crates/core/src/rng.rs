//! Deterministic random streams and the variate generators every simulator
//! draws from.
//!
//! A [`RngStream`] is a ChaCha8 generator keyed by a 64-bit `seed` and a
//! 64-bit `stream_id`. ChaCha is counter based, so the same `(seed,
//! stream_id)` pair yields the same sequence on every platform, and distinct
//! stream ids give independent streams. Simulators derive one child stream
//! per path with [`RngStream::child`], which keeps results identical whether
//! paths are generated sequentially or in parallel.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{ensure_param, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent sub-stream `index` of this stream. Does not advance `self`.
    pub fn child(&self, index: u64) -> RngStream {
        let id = splitmix64(splitmix64(self.stream_id) ^ index.wrapping_add(1));
        RngStream::new(self.seed, id)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        // Poisson::new only fails for non-positive or non-finite means.
        let d = Poisson::new(mean).expect("finite positive Poisson mean");
        let k: f64 = d.sample(&mut self.inner);
        k as u64
    }

    pub(crate) fn gamma_one(&mut self, dist: &Gamma<f64>) -> f64 {
        dist.sample(&mut self.inner)
    }

    pub(crate) fn inverse_gaussian_one(&mut self, mean: f64, shape: f64) -> f64 {
        // Michael, Schucany & Haas: transform a chi-squared(1) draw, then pick
        // one of the two roots with probability mean / (mean + root).
        let z = self.normal();
        let y = mean * z * z;
        // Smaller root written without cancellation:
        //   mean + mean/(2 shape) (y - sqrt(4 shape y + y^2))
        //     = mean * 4 shape y / (y + sqrt(y^2 + 4 shape y))^2
        let x = if y > 0.0 {
            let s = y + (y * y + 4.0 * shape * y).sqrt();
            mean * 4.0 * shape * y / (s * s)
        } else {
            mean
        };
        if x <= 0.0 {
            // Small root underflowed; it is selected with probability one.
            return 0.0;
        }
        let u = self.uniform();
        if u * (mean + x) <= mean {
            x
        } else {
            mean * mean / x
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `n` iid standard normal variates.
pub fn standard_normal(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

/// `n` iid Gamma(shape, scale) variates (mean `shape * scale`).
///
/// Marsaglia–Tsang squeeze-and-reject; shapes below one use the boost
/// `Gamma(shape + 1) * U^(1/shape)`.
pub fn gamma_variate(rng: &mut RngStream, shape: f64, scale: f64, n: usize) -> Result<Vec<f64>> {
    let dist = gamma_dist(shape, scale)?;
    Ok((0..n).map(|_| rng.gamma_one(&dist)).collect())
}

pub(crate) fn gamma_dist(shape: f64, scale: f64) -> Result<Gamma<f64>> {
    ensure_param(shape > 0.0 && shape.is_finite(), || {
        format!("gamma shape must be positive, got {shape}")
    })?;
    ensure_param(scale > 0.0 && scale.is_finite(), || {
        format!("gamma scale must be positive, got {scale}")
    })?;
    Gamma::new(shape, scale).map_err(|e| crate::Error::InvalidParam(e.to_string()))
}

/// `n` iid inverse Gaussian variates with mean `mu` and shape `lambda`
/// (variance `mu^3 / lambda`).
///
/// Recipe: draw `Z ~ N(0,1)`, set `y = mu Z^2`, take the smaller root
/// `x = mu + mu/(2 lambda) (y - sqrt(4 lambda y + y^2))` of the quadratic
/// relating the chi-squared(1) draw to the IG variate, then return `x` with
/// probability `mu / (mu + x)` and `mu^2 / x` otherwise.
pub fn inverse_gaussian_variate(
    rng: &mut RngStream,
    mu: f64,
    lambda: f64,
    n: usize,
) -> Result<Vec<f64>> {
    ensure_param(mu > 0.0 && mu.is_finite(), || {
        format!("inverse Gaussian mean must be positive, got {mu}")
    })?;
    ensure_param(lambda > 0.0 && lambda.is_finite(), || {
        format!("inverse Gaussian shape must be positive, got {lambda}")
    })?;
    Ok((0..n).map(|_| rng.inverse_gaussian_one(mu, lambda)).collect())
}
