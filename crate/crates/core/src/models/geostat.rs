//! Geostatistical regression on a planar design.
//!
//! `y ~ N(τ θ, Σ(τ))` with `Σ = σ1² I + σ2² R`, `R_ij = exp(-|τ_i - τ_j|² / ℓ²)`.
//! The information `τᵀ Σ⁻¹ τ` does not involve θ.

use super::{ConstraintMode, FisherMatrix, FisherModel, ModelSpec, ThetaSample};
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, Matrix};
use crate::rng::{standard_normal, Stream};

pub const DEFAULT_PENALTY_WEIGHT: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct GeostatModel {
    sigma1: f64,
    sigma2: f64,
    length_scale: f64,
    spec: ModelSpec,
}

impl Default for GeostatModel {
    fn default() -> Self {
        GeostatModel::new(1.0, 3.0, 0.01, 100, DEFAULT_PENALTY_WEIGHT).unwrap()
    }
}

impl GeostatModel {
    /// Locations are confined to the unit square centred at the origin.
    pub fn new(
        sigma1: f64,
        sigma2: f64,
        length_scale: f64,
        points: usize,
        penalty_weight: f64,
    ) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0 && length_scale > 0.0) || points == 0 {
            return Err(Error::InvalidConfig(format!(
                "geostat constants must be positive (sigma1 {sigma1}, sigma2 {sigma2}, length_scale {length_scale}, points {points})"
            )));
        }
        let constraint = ConstraintMode::BoxPenalty {
            lower: -0.5,
            upper: 0.5,
            weight: penalty_weight,
        };
        constraint.validate()?;
        let spec = ModelSpec {
            name: "geostat".into(),
            p: 2,
            points,
            coord_dim: 2,
            constraint,
            region: (-0.5, 0.5),
            constants: vec![
                ("sigma1".into(), sigma1),
                ("sigma2".into(), sigma2),
                ("length_scale".into(), length_scale),
            ],
        };
        Ok(GeostatModel {
            sigma1,
            sigma2,
            length_scale,
            spec,
        })
    }

    /// `Σ(τ)` for a flattened `d x 2` location list.
    pub fn covariance(&self, tau: &[f64]) -> Result<Matrix> {
        let d = self.check(tau)?;
        let (s1, s2) = (self.sigma1 * self.sigma1, self.sigma2 * self.sigma2);
        let inv_l2 = 1.0 / (self.length_scale * self.length_scale);
        let mut sigma = Matrix::zeros(d, d);
        for i in 0..d {
            sigma[(i, i)] = s1 + s2;
            for j in 0..i {
                let dx = tau[2 * i] - tau[2 * j];
                let dy = tau[2 * i + 1] - tau[2 * j + 1];
                let v = s2 * (-(dx * dx + dy * dy) * inv_l2).exp();
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        Ok(sigma)
    }

    fn check(&self, tau: &[f64]) -> Result<usize> {
        if !tau.len().is_multiple_of(2) || tau.is_empty() {
            return Err(Error::dims("even, non-empty coordinate list", tau.len()));
        }
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("geostat design"));
        }
        Ok(tau.len() / 2)
    }

    /// `(Σ⁻¹ τ, Σ)`, both `d`-row matrices.
    fn weights(&self, tau: &[f64]) -> Result<(Matrix, Matrix)> {
        let d = self.check(tau)?;
        let x = Matrix::from_row_major(d, 2, tau.to_vec())?;
        let sigma = self.covariance(tau)?;
        Ok((spd_solve(&sigma, &x)?, sigma))
    }
}

/// `τᵀ Σ(τ)⁻¹ τ` with the given constants.
pub fn geostat_fisher(
    tau: &[f64],
    sigma1: f64,
    sigma2: f64,
    length_scale: f64,
) -> Result<FisherMatrix> {
    let m = GeostatModel::new(sigma1, sigma2, length_scale, tau.len() / 2, 0.0)?;
    m.fisher(&ThetaSample(vec![0.0, 0.0]), tau)
}

impl FisherModel for GeostatModel {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Placeholder draws; the information never reads them.
    fn sample_prior(&self, count: usize, rng: &mut Stream) -> Vec<ThetaSample> {
        (0..count)
            .map(|_| ThetaSample(vec![standard_normal(rng), standard_normal(rng)]))
            .collect()
    }

    fn fisher(&self, _theta: &ThetaSample, tau: &[f64]) -> Result<FisherMatrix> {
        let (w, _) = self.weights(tau)?;
        let d = w.rows();
        let mut f = Matrix::zeros(2, 2);
        for i in 0..d {
            let (x, wi) = (&tau[2 * i..2 * i + 2], w.row(i));
            for r in 0..2 {
                for c in 0..2 {
                    f[(r, c)] += x[r] * wi[c];
                }
            }
        }
        let off = 0.5 * (f[(0, 1)] + f[(1, 0)]);
        f[(0, 1)] = off;
        f[(1, 0)] = off;
        Ok(f)
    }

    // ∂I/∂τ_ik = e_k W_iᵀ + W_i e_kᵀ - (W_i vᵀ + v W_iᵀ), v = Σ_j (∂Σ/∂τ_ik)_ij W_j,
    // with W = Σ⁻¹τ. Only row/column i of Σ moves with τ_ik.
    fn fisher_dtau(&self, _theta: &ThetaSample, tau: &[f64]) -> Result<Vec<Matrix>> {
        let (w, sigma) = self.weights(tau)?;
        let d = w.rows();
        let inv_l2 = 1.0 / (self.length_scale * self.length_scale);
        let mut out = Vec::with_capacity(2 * d);
        for i in 0..d {
            let wi = [w[(i, 0)], w[(i, 1)]];
            for k in 0..2 {
                let mut v = [0.0, 0.0];
                for j in 0..d {
                    if j == i {
                        continue;
                    }
                    // off-diagonal Σ_ij is σ2² R_ij
                    let r = sigma[(i, j)];
                    if r == 0.0 {
                        continue;
                    }
                    let ds = r * (-2.0 * (tau[2 * i + k] - tau[2 * j + k]) * inv_l2);
                    v[0] += ds * w[(j, 0)];
                    v[1] += ds * w[(j, 1)];
                }
                let mut m = Matrix::zeros(2, 2);
                for r in 0..2 {
                    for c in 0..2 {
                        let ek_r = if r == k { 1.0 } else { 0.0 };
                        let ek_c = if c == k { 1.0 } else { 0.0 };
                        m[(r, c)] = ek_r * wi[c] + wi[r] * ek_c - (wi[r] * v[c] + v[r] * wi[c]);
                    }
                }
                out.push(m);
            }
        }
        Ok(out)
    }

    fn theta_free(&self) -> bool {
        true
    }
}
