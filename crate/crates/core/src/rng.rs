//! Seeded random streams and the few samplers the models need.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

/// Named sub-streams of one master seed. Each purpose gets its own ChaCha
/// stream so that changing how many draws one consumer makes never shifts
/// another consumer's numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamId {
    Theta = 0,
    Noise = 1,
    Diagnostic = 2,
    Init = 3,
    Posterior = 4,
}

pub fn stream(seed: u64, id: StreamId) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Gamma(shape, 1) via Marsaglia & Tsang (2000). Shapes below one use the
/// `U^(1/shape)` boost.
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        let u: f64 = rng.random();
        return gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = standard_normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// exp(N(mu, variance)).
pub fn lognormal<R: Rng + ?Sized>(rng: &mut R, mu: f64, variance: f64) -> f64 {
    (mu + variance.sqrt() * standard_normal(rng)).exp()
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}
