//! Monte Carlo estimators of the minimax objective `K(τ, A)` and of the
//! trace/determinant design criteria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    adversary_gradient, cholesky_unit_det, determinant, spd_solve, trace_quadratic_form,
    AdversaryParams, Matrix,
};
use crate::models::{
    mean_fisher, mean_fisher_dtau, ConstraintMode, Design, FisherModel, ThetaSample,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Determinant criterion, solved as a game against the adversary.
    Adv,
    /// Trace criterion; the adversary stays at the identity.
    Fig,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adv" => Ok(Objective::Adv),
            "fig" => Ok(Objective::Fig),
            other => Err(Error::InvalidConfig(format!("unknown objective `{other}`"))),
        }
    }
}

/// `-tr[Aᵀ (mean_k I(θ_k; τ)) A]`.
pub fn k_hat<M: FisherModel + ?Sized>(
    model: &M,
    batch: &[ThetaSample],
    design: &Design,
    a: &Matrix,
) -> Result<f64> {
    let fbar = mean_fisher(model, batch, &design.natural())?;
    Ok(-trace_quadratic_form(a, &fbar)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KGradient {
    /// `K̂` at the evaluation point.
    pub value: f64,
    /// `∂K̂/∂(coord_j)` in the design's stored coordinates.
    pub design: Vec<f64>,
    /// `∂K̂/∂η`.
    pub adversary: Vec<f64>,
}

/// Value and gradients of `K̂(τ, A(η))` on one batch.
pub fn grad_k_hat<M: FisherModel + ?Sized>(
    model: &M,
    batch: &[ThetaSample],
    design: &Design,
    eta: &AdversaryParams,
) -> Result<KGradient> {
    let natural = design.natural();
    let fbar = mean_fisher(model, batch, &natural)?;
    let dfbar = mean_fisher_dtau(model, batch, &natural)?;
    let a = cholesky_unit_det(eta);
    let value = -trace_quadratic_form(&a, &fbar)?;
    let chain = design.natural_derivative();
    let mut dgrad = Vec::with_capacity(dfbar.len());
    for (d, s) in dfbar.iter().zip(chain) {
        dgrad.push(-s * trace_quadratic_form(&a, d)?);
    }
    let agrad = adversary_gradient(&fbar, eta)?;
    Ok(KGradient {
        value,
        design: dgrad,
        adversary: agrad,
    })
}

/// Criterion applied to an already averaged information matrix.
pub fn criterion(fbar: &Matrix, kind: Objective) -> f64 {
    match kind {
        Objective::Adv => determinant(fbar),
        Objective::Fig => fbar.trace(),
    }
}

/// `det` or `tr` of the information averaged over a fixed θ sample.
/// `tau` is in natural coordinates.
pub fn j_hat<M: FisherModel + ?Sized>(
    model: &M,
    fixed: &[ThetaSample],
    tau: &[f64],
    kind: Objective,
) -> Result<f64> {
    Ok(criterion(&mean_fisher(model, fixed, tau)?, kind))
}

/// Gradient of the L1 box penalty in stored coordinates. Zero inside the box.
pub fn box_penalty_gradient(design: &Design) -> Vec<f64> {
    match design.constraint {
        ConstraintMode::BoxPenalty {
            lower,
            upper,
            weight,
        } => design
            .coords
            .iter()
            .map(|&x| {
                if x > upper {
                    weight
                } else if x < lower {
                    -weight
                } else {
                    0.0
                }
            })
            .collect(),
        _ => vec![0.0; design.len()],
    }
}

/// Closed-form inner maximum of `K(τ, ·)` for a fixed positive-definite
/// information matrix: `A* = chol(det(Ī)^{1/p} Ī⁻¹)`, giving
/// `K = -p det(Ī)^{1/p}`. Returns `(A*, K(A*))`.
pub fn inner_maximum(fbar: &Matrix) -> Result<(Matrix, f64)> {
    let p = fbar.rows();
    let det = determinant(fbar);
    if !(det > 0.0) {
        return Err(Error::Singular);
    }
    let scale = det.powf(1.0 / p as f64);
    let inv = spd_solve(fbar, &Matrix::identity(p))?;
    let mut target = inv.scaled(scale);
    // clean round-off asymmetry before factorising
    for r in 0..p {
        for c in 0..r {
            let avg = 0.5 * (target[(r, c)] + target[(c, r)]);
            target[(r, c)] = avg;
            target[(c, r)] = avg;
        }
    }
    let a = target.cholesky()?;
    let k = -trace_quadratic_form(&a, fbar)?;
    Ok((a, k))
}
