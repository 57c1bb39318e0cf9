//! Importance-sampling posterior with the prior as proposal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FisherModel, GaussianModel, ThetaSample};
use crate::rng::{standard_normal, stream, StreamId};

/// Below this effective sample size the weights are flagged as degenerate.
pub const MIN_EFFECTIVE_SAMPLE_SIZE: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub observations: Vec<f64>,
    pub samples: Vec<ThetaSample>,
    /// Normalised to sum to one.
    pub weights: Vec<f64>,
    pub effective_sample_size: f64,
}

impl PosteriorSamples {
    pub fn degenerate(&self) -> bool {
        self.effective_sample_size < MIN_EFFECTIVE_SAMPLE_SIZE
    }

    pub fn weighted_mean(&self) -> Vec<f64> {
        let p = self.samples.first().map_or(0, |s| s.values().len());
        let mut m = vec![0.0; p];
        for (s, w) in self.samples.iter().zip(&self.weights) {
            for (acc, v) in m.iter_mut().zip(s.values()) {
                *acc += w * v;
            }
        }
        m
    }
}

/// Normalises log-weights with the max-shift trick; returns the weights and
/// the effective sample size `1 / Σ w²`.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<(Vec<f64>, f64)> {
    if log_w.is_empty() {
        return Err(Error::Empty("log weights"));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("log weights"));
    }
    let raw: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
    Ok((w, ess))
}

/// Gaussian log-likelihood up to a constant.
pub fn gaussian_log_likelihood(
    model: &dyn GaussianModel,
    theta: &ThetaSample,
    tau: &[f64],
    y: &[f64],
) -> Result<f64> {
    let x = model.mean(theta, tau)?;
    let s = model.sigma();
    // standardise before squaring so very large σ cannot overflow
    Ok(-0.5
        * x.iter()
            .zip(y)
            .map(|(m, o)| ((o - m) / s).powi(2))
            .sum::<f64>())
}

/// Weights `samples` by the likelihood of `y`.
pub fn importance_posterior(
    model: &dyn GaussianModel,
    tau: &[f64],
    y: &[f64],
    samples: Vec<ThetaSample>,
) -> Result<PosteriorSamples> {
    if y.len() != tau.len() {
        return Err(Error::dims(tau.len(), y.len()));
    }
    let log_w = samples
        .iter()
        .map(|s| gaussian_log_likelihood(model, s, tau, y))
        .collect::<Result<Vec<f64>>>()?;
    let (weights, ess) = normalize_log_weights(&log_w)?;
    Ok(PosteriorSamples {
        observations: y.to_vec(),
        samples,
        weights,
        effective_sample_size: ess,
    })
}

/// Simulates one dataset at `theta_true`, then weights `count` prior draws.
pub fn sample_posterior<M: FisherModel + ?Sized>(
    model: &M,
    tau: &[f64],
    theta_true: &ThetaSample,
    count: usize,
    seed: u64,
) -> Result<PosteriorSamples> {
    let g = model
        .gaussian()
        .ok_or_else(|| Error::NotGaussian(model.spec().name.clone()))?;
    if count == 0 {
        return Err(Error::Empty("posterior sample count"));
    }
    let mut rng = stream(seed, StreamId::Posterior);
    let mean = g.mean(theta_true, tau)?;
    let y: Vec<f64> = mean
        .iter()
        .map(|m| m + g.sigma() * standard_normal(&mut rng))
        .collect();
    let samples = model.sample_prior(count, &mut rng);
    importance_posterior(g, tau, &y, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_log_weights_are_uniform() {
        let (w, ess) = normalize_log_weights(&[-3.0; 8]).unwrap();
        assert!(w.iter().all(|&x| (x - 0.125).abs() < 1e-16));
        assert!((ess - 8.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_log_weights_do_not_overflow() {
        let (w, ess) = normalize_log_weights(&[-1e6, -1e6 - 1.0, -2e6]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w[2] == 0.0 && ess > 1.0);
        assert!(normalize_log_weights(&[]).is_err());
    }
}
