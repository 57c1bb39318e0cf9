//! Model interface and the three bundled models.
//!
//! A model supplies prior draws, the Fisher information `I(θ; τ)` at a
//! design, and the derivative of that matrix with respect to every design
//! coordinate. Models work in *natural* design coordinates (times,
//! locations, allocation fraction); the [`Design`] type carries the
//! unconstrained storage the optimiser moves and converts between the two.

mod geostat;
mod pk;
mod poisson;

pub use geostat::{geostat_fisher, GeostatModel, DEFAULT_PENALTY_WEIGHT};
pub use pk::{pk_fisher, pk_jacobian, pk_jacobian_dt, pk_mean, PkModel};
pub use poisson::{poisson_expected_fisher, poisson_fisher, PoissonMode, PoissonModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse, Matrix};
use crate::rng::Stream;

/// `p x p` symmetric positive-semidefinite information matrix.
pub type FisherMatrix = Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample(pub Vec<f64>);

impl ThetaSample {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintMode {
    Free,
    /// Stored coordinate is `λ`, with `τ = logistic(λ)` in `(0, 1)`.
    LogitTransformed,
    /// L1 penalty of `weight` per unit of violation outside `[lower, upper]`.
    BoxPenalty {
        lower: f64,
        upper: f64,
        weight: f64,
    },
}

impl ConstraintMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintMode::BoxPenalty {
                lower,
                upper,
                weight,
            } if !(lower < upper) || !(weight >= 0.0) => Err(Error::InvalidConfig(format!(
                "box penalty needs lower < upper and weight >= 0 (got [{lower}, {upper}], {weight})"
            ))),
            _ => Ok(()),
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// The optimiser's decision variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub coords: Vec<f64>,
    pub constraint: ConstraintMode,
}

impl Design {
    pub fn new(coords: Vec<f64>, constraint: ConstraintMode) -> Result<Self> {
        constraint.validate()?;
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design coordinates"));
        }
        Ok(Design { coords, constraint })
    }

    /// Builds a design from natural coordinates, inverting the transform.
    pub fn from_natural(natural: &[f64], constraint: ConstraintMode) -> Result<Self> {
        let coords = match constraint {
            ConstraintMode::LogitTransformed => natural.iter().map(|&t| logit(t)).collect(),
            _ => natural.to_vec(),
        };
        Design::new(coords, constraint)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn natural(&self) -> Vec<f64> {
        match self.constraint {
            ConstraintMode::LogitTransformed => self.coords.iter().map(|&x| logistic(x)).collect(),
            _ => self.coords.clone(),
        }
    }

    /// `dτ_j / d(coord_j)` for each coordinate.
    pub fn natural_derivative(&self) -> Vec<f64> {
        match self.constraint {
            ConstraintMode::LogitTransformed => self
                .coords
                .iter()
                .map(|&x| {
                    let t = logistic(x);
                    t * (1.0 - t)
                })
                .collect(),
            _ => vec![1.0; self.coords.len()],
        }
    }
}

/// Static description of a model instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub name: String,
    /// Parameter dimension.
    pub p: usize,
    /// Number of design points (times or locations).
    pub points: usize,
    /// 1 for times, 2 for planar locations.
    pub coord_dim: usize,
    pub constraint: ConstraintMode,
    /// Lower/upper corner of the region initial designs are drawn from.
    pub region: (f64, f64),
    pub constants: Vec<(String, f64)>,
}

impl ModelSpec {
    pub fn design_length(&self) -> usize {
        self.points * self.coord_dim
    }
}

pub trait FisherModel: Send + Sync {
    fn spec(&self) -> &ModelSpec;

    fn sample_prior(&self, count: usize, rng: &mut Stream) -> Vec<ThetaSample>;

    /// `I(θ; τ)` at natural design coordinates `tau`.
    fn fisher(&self, theta: &ThetaSample, tau: &[f64]) -> Result<FisherMatrix>;

    /// `∂I/∂τ_j` for every natural coordinate `j`.
    fn fisher_dtau(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<Matrix>>;

    /// True when `I(θ; τ)` does not depend on θ.
    fn theta_free(&self) -> bool {
        false
    }

    /// Contribution of a single design point when the information is additive
    /// over points. Lets point exchange update designs incrementally.
    fn point_fisher(&self, _theta: &ThetaSample, _point: &[f64]) -> Option<Result<FisherMatrix>> {
        None
    }

    /// Only meaningful for Gaussian-observation models with known noise scale.
    fn gaussian(&self) -> Option<&dyn GaussianModel> {
        None
    }
}

/// Models with `y ~ N(x(θ, τ), σ² I)`.
pub trait GaussianModel: Sync {
    fn sigma(&self) -> f64;
    /// Observation means, one per design point.
    fn mean(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<f64>>;
    /// `n x p` Jacobian `∂x_i/∂θ_j`.
    fn jacobian(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Matrix>;
    /// Row `i` differentiated with respect to its own design time `τ_i`.
    fn jacobian_dt(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Matrix>;
}

/// Mean of `I(θ; τ)` over a batch.
pub fn mean_fisher<M: FisherModel + ?Sized>(
    model: &M,
    batch: &[ThetaSample],
    tau: &[f64],
) -> Result<FisherMatrix> {
    let first = batch.first().ok_or(Error::Empty("theta batch"))?;
    if model.theta_free() {
        return model.fisher(first, tau);
    }
    let p = model.spec().p;
    let mut acc = Matrix::zeros(p, p);
    for theta in batch {
        acc.add_assign_scaled(&model.fisher(theta, tau)?, 1.0)?;
    }
    Ok(acc.scaled(1.0 / batch.len() as f64))
}

/// Mean over a batch of `∂I/∂τ_j`, natural coordinates.
pub fn mean_fisher_dtau<M: FisherModel + ?Sized>(
    model: &M,
    batch: &[ThetaSample],
    tau: &[f64],
) -> Result<Vec<Matrix>> {
    let first = batch.first().ok_or(Error::Empty("theta batch"))?;
    if model.theta_free() {
        return model.fisher_dtau(first, tau);
    }
    let mut acc = model.fisher_dtau(first, tau)?;
    for theta in &batch[1..] {
        for (a, d) in acc.iter_mut().zip(model.fisher_dtau(theta, tau)?) {
            a.add_assign_scaled(&d, 1.0)?;
        }
    }
    let s = 1.0 / batch.len() as f64;
    Ok(acc.into_iter().map(|m| m.scaled(s)).collect())
}

/// `∂I/∂(coord_j)` for the design's stored coordinates, applying the
/// transform's chain rule.
pub fn fisher_dtau<M: FisherModel + ?Sized>(
    model: &M,
    theta: &ThetaSample,
    design: &Design,
) -> Result<Vec<Matrix>> {
    let raw = model.fisher_dtau(theta, &design.natural())?;
    Ok(raw
        .into_iter()
        .zip(design.natural_derivative())
        .map(|(m, s)| if s == 1.0 { m } else { m.scaled(s) })
        .collect())
}

/// Fisher information under the linear reparameterisation `φ = Bθ`:
/// `B⁻ᵀ Ī B⁻¹`.
pub fn reparameterized_expected_fisher(fisher: &FisherMatrix, b: &Matrix) -> Result<FisherMatrix> {
    if !b.is_square() || b.rows() != fisher.rows() {
        return Err(Error::dims(
            format!("{0}x{0}", fisher.rows()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    let b_inv = inverse(b)?;
    b_inv.transpose().matmul(fisher)?.matmul(&b_inv)
}

/// Model lookup by the names the CLI accepts.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Poisson(PoissonModel),
    Pk(PkModel),
    Geostat(GeostatModel),
}

impl AnyModel {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "poisson" => Ok(AnyModel::Poisson(PoissonModel::default())),
            "pk" => Ok(AnyModel::Pk(PkModel::default())),
            "geostat" => Ok(AnyModel::Geostat(GeostatModel::default())),
            other => Err(Error::InvalidConfig(format!(
                "unknown model `{other}` (expected poisson, pk or geostat)"
            ))),
        }
    }

    pub fn as_dyn(&self) -> &dyn FisherModel {
        match self {
            AnyModel::Poisson(m) => m,
            AnyModel::Pk(m) => m,
            AnyModel::Geostat(m) => m,
        }
    }
}

impl FisherModel for AnyModel {
    fn spec(&self) -> &ModelSpec {
        self.as_dyn().spec()
    }
    fn sample_prior(&self, count: usize, rng: &mut Stream) -> Vec<ThetaSample> {
        self.as_dyn().sample_prior(count, rng)
    }
    fn fisher(&self, theta: &ThetaSample, tau: &[f64]) -> Result<FisherMatrix> {
        self.as_dyn().fisher(theta, tau)
    }
    fn fisher_dtau(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<Matrix>> {
        self.as_dyn().fisher_dtau(theta, tau)
    }
    fn theta_free(&self) -> bool {
        self.as_dyn().theta_free()
    }
    fn point_fisher(&self, theta: &ThetaSample, point: &[f64]) -> Option<Result<FisherMatrix>> {
        self.as_dyn().point_fisher(theta, point)
    }
    fn gaussian(&self) -> Option<&dyn GaussianModel> {
        self.as_dyn().gaussian()
    }
}
