//! Score-function estimators of `K` and its gradient for Gaussian-observation
//! models, for use when the Fisher matrix is treated as unavailable.
//!
//! With `y = x(θ, τ) + σ ε`, the score is `u = σ⁻² Jᵀ (y - x) = σ⁻¹ Jᵀ ε`
//! and `K(τ, A) = -E ‖Aᵀ u‖²`. Holding ε fixed makes the estimator a
//! differentiable function of τ and η.

use crate::error::{Error, Result};
use crate::estimate::KGradient;
use crate::linalg::{adversary_gradient, cholesky_unit_det, AdversaryParams, Matrix};
use crate::models::{Design, FisherModel, GaussianModel, ThetaSample};
use crate::rng::{standard_normal, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSample {
    pub epsilon: Vec<f64>,
    pub score: Vec<f64>,
}

fn gaussian_of<M: FisherModel + ?Sized>(model: &M) -> Result<&dyn GaussianModel> {
    model
        .gaussian()
        .ok_or_else(|| Error::NotGaussian(model.spec().name.clone()))
}

/// Score at `y = x + σε` for natural design coordinates `tau`.
pub fn normal_score<M: FisherModel + ?Sized>(
    model: &M,
    theta: &ThetaSample,
    tau: &[f64],
    epsilon: &[f64],
) -> Result<ScoreSample> {
    let g = gaussian_of(model)?;
    if epsilon.len() != tau.len() {
        return Err(Error::dims(tau.len(), epsilon.len()));
    }
    let j = g.jacobian(theta, tau)?;
    let score = jt_times(&j, epsilon, 1.0 / g.sigma());
    if score.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("score"));
    }
    Ok(ScoreSample {
        epsilon: epsilon.to_vec(),
        score,
    })
}

fn jt_times(j: &Matrix, e: &[f64], s: f64) -> Vec<f64> {
    let mut out = vec![0.0; j.cols()];
    for (i, &ei) in e.iter().enumerate() {
        for (o, &jv) in out.iter_mut().zip(j.row(i)) {
            *o += s * jv * ei;
        }
    }
    out
}

/// `K` standard-normal noise vectors of length `n`.
pub fn draw_noise(count: usize, n: usize, rng: &mut Stream) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| standard_normal(rng)).collect())
        .collect()
}

fn check_batches(thetas: &[ThetaSample], noise: &[Vec<f64>]) -> Result<()> {
    if thetas.is_empty() {
        return Err(Error::Empty("theta batch"));
    }
    if thetas.len() != noise.len() {
        return Err(Error::dims(
            format!("{} noise vectors", thetas.len()),
            noise.len(),
        ));
    }
    Ok(())
}

fn quad(m: &Matrix, u: &[f64]) -> f64 {
    let mut s = 0.0;
    for r in 0..u.len() {
        for c in 0..u.len() {
            s += u[r] * m[(r, c)] * u[c];
        }
    }
    s
}

/// `-(1/K) Σ_k ‖Aᵀ u_k‖²`.
pub fn k_hat_score<M: FisherModel + ?Sized>(
    model: &M,
    thetas: &[ThetaSample],
    noise: &[Vec<f64>],
    design: &Design,
    a: &Matrix,
) -> Result<f64> {
    check_batches(thetas, noise)?;
    let tau = design.natural();
    let aat = a.matmul(&a.transpose())?;
    let mut total = 0.0;
    for (theta, eps) in thetas.iter().zip(noise) {
        let u = normal_score(model, theta, &tau, eps)?.score;
        total += quad(&aat, &u);
    }
    Ok(-total / thetas.len() as f64)
}

/// Reparameterised gradient of [`k_hat_score`] with the noise held fixed.
pub fn grad_k_hat_score<M: FisherModel + ?Sized>(
    model: &M,
    thetas: &[ThetaSample],
    noise: &[Vec<f64>],
    design: &Design,
    eta: &AdversaryParams,
) -> Result<KGradient> {
    check_batches(thetas, noise)?;
    let g = gaussian_of(model)?;
    let tau = design.natural();
    let inv_sigma = 1.0 / g.sigma();
    let a = cholesky_unit_det(eta);
    let aat = a.matmul(&a.transpose())?;
    let p = a.rows();
    let n = tau.len();
    let kf = thetas.len() as f64;

    let mut value = 0.0;
    let mut dgrad = vec![0.0; n];
    let mut uu = Matrix::zeros(p, p);
    for (theta, eps) in thetas.iter().zip(noise) {
        if eps.len() != n {
            return Err(Error::dims(n, eps.len()));
        }
        let j = g.jacobian(theta, &tau)?;
        let dj = g.jacobian_dt(theta, &tau)?;
        let u = jt_times(&j, eps, inv_sigma);
        value += quad(&aat, &u);
        // M u
        let mu: Vec<f64> = (0..p)
            .map(|r| (0..p).map(|c| aat[(r, c)] * u[c]).sum())
            .collect();
        for i in 0..n {
            // ∂u/∂τ_i = σ⁻¹ ε_i (row i of ∂J/∂τ_i)
            let s = inv_sigma * eps[i];
            let dot: f64 = dj.row(i).iter().zip(&mu).map(|(x, y)| x * y).sum();
            dgrad[i] += 2.0 * s * dot;
        }
        for r in 0..p {
            for c in 0..p {
                uu[(r, c)] += u[r] * u[c];
            }
        }
    }
    let chain = design.natural_derivative();
    let design_grad = dgrad.iter().zip(chain).map(|(d, c)| -c * d / kf).collect();
    let uu = uu.scaled(1.0 / kf);
    Ok(KGradient {
        value: -value / kf,
        design: design_grad,
        adversary: adversary_gradient(&uu, eta)?,
    })
}
