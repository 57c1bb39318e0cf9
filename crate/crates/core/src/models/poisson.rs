//! Two Poisson experiments sharing a unit of time.
//!
//! `y1 ~ Poisson(τ θ1 ω1)`, `y2 ~ Poisson((1-τ) θ2 ω2)`, Gamma(2, 1) priors.

use serde::{Deserialize, Serialize};

use super::{ConstraintMode, FisherMatrix, FisherModel, ModelSpec, ThetaSample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{gamma, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonMode {
    /// `I(θ; τ)` evaluated at each prior draw.
    PerTheta,
    /// Closed-form prior expectation `Ī(τ)`; θ draws are ignored.
    Exact,
}

#[derive(Clone, Debug)]
pub struct PoissonModel {
    omega1: f64,
    omega2: f64,
    mode: PoissonMode,
    spec: ModelSpec,
}

impl Default for PoissonModel {
    fn default() -> Self {
        PoissonModel::new(2.0, 1.0, PoissonMode::Exact).unwrap()
    }
}

impl PoissonModel {
    pub fn new(omega1: f64, omega2: f64, mode: PoissonMode) -> Result<Self> {
        if !(omega1 > omega2 && omega2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "poisson requires omega1 > omega2 > 0 (got {omega1}, {omega2})"
            )));
        }
        let spec = ModelSpec {
            name: "poisson".into(),
            p: 2,
            points: 1,
            coord_dim: 1,
            constraint: ConstraintMode::LogitTransformed,
            region: (0.0, 1.0),
            constants: vec![("omega1".into(), omega1), ("omega2".into(), omega2)],
        };
        Ok(PoissonModel {
            omega1,
            omega2,
            mode,
            spec,
        })
    }

    pub fn omegas(&self) -> (f64, f64) {
        (self.omega1, self.omega2)
    }

    pub fn mode(&self) -> PoissonMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: PoissonMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn expected_fisher(&self, tau: f64) -> Result<FisherMatrix> {
        poisson_expected_fisher(tau, self.omega1, self.omega2)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!(
            "poisson design {tau} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `diag(τ ω1 / θ1, (1-τ) ω2 / θ2)`.
pub fn poisson_fisher(
    theta: &ThetaSample,
    tau: f64,
    omega1: f64,
    omega2: f64,
) -> Result<FisherMatrix> {
    check_tau(tau)?;
    let t = theta.values();
    if t.len() != 2 {
        return Err(Error::dims(2, t.len()));
    }
    if !(t[0] > 0.0 && t[1] > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "poisson theta {t:?} must be positive"
        )));
    }
    Ok(Matrix::from_diag(&[
        tau * omega1 / t[0],
        (1.0 - tau) * omega2 / t[1],
    ]))
}

/// `diag(τ ω1, (1-τ) ω2)`, since `E[1/θ] = 1` under Gamma(2, 1).
pub fn poisson_expected_fisher(tau: f64, omega1: f64, omega2: f64) -> Result<FisherMatrix> {
    check_tau(tau)?;
    Ok(Matrix::from_diag(&[tau * omega1, (1.0 - tau) * omega2]))
}

impl FisherModel for PoissonModel {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn sample_prior(&self, count: usize, rng: &mut Stream) -> Vec<ThetaSample> {
        (0..count)
            .map(|_| ThetaSample(vec![gamma(rng, 2.0), gamma(rng, 2.0)]))
            .collect()
    }

    fn fisher(&self, theta: &ThetaSample, tau: &[f64]) -> Result<FisherMatrix> {
        if tau.len() != 1 {
            return Err(Error::dims(1, tau.len()));
        }
        match self.mode {
            PoissonMode::PerTheta => poisson_fisher(theta, tau[0], self.omega1, self.omega2),
            PoissonMode::Exact => poisson_expected_fisher(tau[0], self.omega1, self.omega2),
        }
    }

    fn fisher_dtau(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<Matrix>> {
        if tau.len() != 1 {
            return Err(Error::dims(1, tau.len()));
        }
        let d = match self.mode {
            PoissonMode::PerTheta => {
                // linear in τ: reuse the value at τ = 1 and τ = 0
                let hi = poisson_fisher(theta, 1.0, self.omega1, self.omega2)?;
                let lo = poisson_fisher(theta, 0.0, self.omega1, self.omega2)?;
                Matrix::from_diag(&[hi[(0, 0)], -lo[(1, 1)]])
            }
            PoissonMode::Exact => Matrix::from_diag(&[self.omega1, -self.omega2]),
        };
        Ok(vec![d])
    }

    fn theta_free(&self) -> bool {
        self.mode == PoissonMode::Exact
    }

    fn point_fisher(&self, theta: &ThetaSample, point: &[f64]) -> Option<Result<FisherMatrix>> {
        Some(self.fisher(theta, point))
    }
}
