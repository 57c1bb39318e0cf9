//! One-compartment pharmacokinetic model with first-order absorption.
//!
//! Mean concentration at time `t`:
//! `x(θ, t) = D θ2 (exp(-θ1 t) - exp(-θ2 t)) / (θ3 (θ2 - θ1))`,
//! observed with additive `N(0, σ²)` noise at each design time.

use super::{ConstraintMode, FisherMatrix, FisherModel, GaussianModel, ModelSpec, ThetaSample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{lognormal, Stream};

#[derive(Clone, Debug)]
pub struct PkModel {
    dose: f64,
    sigma: f64,
    /// Log-scale prior means for (θ1, θ2, θ3).
    prior_log_means: [f64; 3],
    /// Variance of each log θ_i.
    prior_log_variance: f64,
    spec: ModelSpec,
}

impl Default for PkModel {
    fn default() -> Self {
        PkModel::new(400.0, 0.1, 15, 24.0).unwrap()
    }
}

impl PkModel {
    pub fn new(dose: f64, sigma: f64, points: usize, horizon: f64) -> Result<Self> {
        if !(dose > 0.0 && sigma > 0.0 && horizon > 0.0) || points == 0 {
            return Err(Error::InvalidConfig(format!(
                "pk constants must be positive (dose {dose}, sigma {sigma}, points {points}, horizon {horizon})"
            )));
        }
        let spec = ModelSpec {
            name: "pk".into(),
            p: 3,
            points,
            coord_dim: 1,
            constraint: ConstraintMode::Free,
            region: (0.0, horizon),
            constants: vec![
                ("dose".into(), dose),
                ("sigma".into(), sigma),
                ("horizon".into(), horizon),
            ],
        };
        Ok(PkModel {
            dose,
            sigma,
            prior_log_means: [0.1f64.ln(), 1.0f64.ln(), 20.0f64.ln()],
            prior_log_variance: 0.05,
            spec,
        })
    }

    pub fn dose(&self) -> f64 {
        self.dose
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        PkModel::new(self.dose, sigma, self.spec.points, self.spec.region.1)
    }

    pub fn prior_log_means(&self) -> [f64; 3] {
        self.prior_log_means
    }

    pub fn prior_log_variance(&self) -> f64 {
        self.prior_log_variance
    }
}

fn rates(theta: &ThetaSample) -> Result<(f64, f64, f64)> {
    let t = theta.values();
    if t.len() != 3 {
        return Err(Error::dims(3, t.len()));
    }
    if !(t[0] > 0.0 && t[1] > 0.0 && t[2] > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pk theta {t:?} must be positive"
        )));
    }
    if t[1] == t[0] {
        return Err(Error::DegenerateRates(t[0]));
    }
    Ok((t[0], t[1], t[2]))
}

/// Mean concentration at time `t` (hours).
pub fn pk_mean(theta: &ThetaSample, t: f64, dose: f64) -> Result<f64> {
    let (a, b, v) = rates(theta)?;
    let c = dose * b / (v * (b - a));
    Ok(c * ((-a * t).exp() - (-b * t).exp()))
}

/// `n x 3` Jacobian of the mean with respect to θ.
pub fn pk_jacobian(theta: &ThetaSample, times: &[f64], dose: f64) -> Result<Matrix> {
    let (a, b, v) = rates(theta)?;
    let c = dose * b / (v * (b - a));
    let mut j = Matrix::zeros(times.len(), 3);
    for (i, &t) in times.iter().enumerate() {
        let (ea, eb) = ((-a * t).exp(), (-b * t).exp());
        let x = c * (ea - eb);
        j[(i, 0)] = x / (b - a) - c * t * ea;
        j[(i, 1)] = a / (b * (a - b)) * x + c * t * eb;
        j[(i, 2)] = -x / v;
    }
    Ok(j)
}

/// Each Jacobian row differentiated with respect to its own time.
pub fn pk_jacobian_dt(theta: &ThetaSample, times: &[f64], dose: f64) -> Result<Matrix> {
    let (a, b, v) = rates(theta)?;
    let c = dose * b / (v * (b - a));
    let mut j = Matrix::zeros(times.len(), 3);
    for (i, &t) in times.iter().enumerate() {
        let (ea, eb) = ((-a * t).exp(), (-b * t).exp());
        let dx = c * (b * eb - a * ea);
        j[(i, 0)] = dx / (b - a) - c * ea * (1.0 - a * t);
        j[(i, 1)] = a / (b * (a - b)) * dx + c * eb * (1.0 - b * t);
        j[(i, 2)] = -dx / v;
    }
    Ok(j)
}

/// `σ⁻² JᵀJ`.
pub fn pk_fisher(
    theta: &ThetaSample,
    times: &[f64],
    dose: f64,
    sigma: f64,
) -> Result<FisherMatrix> {
    let j = pk_jacobian(theta, times, dose)?;
    let mut f = Matrix::zeros(3, 3);
    for i in 0..j.rows() {
        outer_acc(&mut f, j.row(i), j.row(i), 1.0);
    }
    Ok(symmetric_scaled(f, 1.0 / (sigma * sigma)))
}

fn outer_acc(acc: &mut Matrix, u: &[f64], w: &[f64], s: f64) {
    for r in 0..u.len() {
        for c in 0..w.len() {
            acc[(r, c)] += s * u[r] * w[c];
        }
    }
}

fn symmetric_scaled(m: Matrix, s: f64) -> Matrix {
    let mut out = m.scaled(s);
    let p = out.rows();
    for r in 0..p {
        for c in 0..r {
            let avg = 0.5 * (out[(r, c)] + out[(c, r)]);
            out[(r, c)] = avg;
            out[(c, r)] = avg;
        }
    }
    out
}

impl FisherModel for PkModel {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn sample_prior(&self, count: usize, rng: &mut Stream) -> Vec<ThetaSample> {
        let var = self.prior_log_variance;
        (0..count)
            .map(|_| {
                ThetaSample(
                    self.prior_log_means
                        .iter()
                        .map(|&mu| lognormal(rng, mu, var))
                        .collect(),
                )
            })
            .collect()
    }

    fn fisher(&self, theta: &ThetaSample, tau: &[f64]) -> Result<FisherMatrix> {
        pk_fisher(theta, tau, self.dose, self.sigma)
    }

    fn fisher_dtau(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<Matrix>> {
        let j = pk_jacobian(theta, tau, self.dose)?;
        let dj = pk_jacobian_dt(theta, tau, self.dose)?;
        let s = 1.0 / (self.sigma * self.sigma);
        Ok((0..tau.len())
            .map(|i| {
                let mut m = Matrix::zeros(3, 3);
                outer_acc(&mut m, dj.row(i), j.row(i), s);
                outer_acc(&mut m, j.row(i), dj.row(i), s);
                m
            })
            .collect())
    }

    fn point_fisher(&self, theta: &ThetaSample, point: &[f64]) -> Option<Result<FisherMatrix>> {
        Some(self.fisher(theta, point))
    }

    fn gaussian(&self) -> Option<&dyn GaussianModel> {
        Some(self)
    }
}

impl GaussianModel for PkModel {
    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn mean(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<f64>> {
        tau.iter().map(|&t| pk_mean(theta, t, self.dose)).collect()
    }

    fn jacobian(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Matrix> {
        pk_jacobian(theta, tau, self.dose)
    }

    fn jacobian_dt(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Matrix> {
        pk_jacobian_dt(theta, tau, self.dose)
    }
}
