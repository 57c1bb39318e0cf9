//! Bayesian experimental design by gradient descent ascent on an adversarial
//! Fisher information objective.
//!
//! The experimenter picks a design `τ`; an adversary picks a unit-determinant
//! lower-triangular matrix `A` reparameterising the parameters. The game value
//!
//! ```text
//! K(τ, A) = -E_θ tr[Aᵀ I(θ; τ) A]
//! ```
//!
//! is minimised over `τ` and maximised over `A`. At the inner optimum
//! `K = -p det(Ī(τ))^{1/p}`, so minimax designs maximise `det Ī(τ)`, a
//! Bayesian D-optimality criterion. Fixing `A = I` instead gives SGD on the
//! trace criterion `tr Ī(τ)`.
//!
//! Modules:
//! - [`linalg`]: small dense kernels, the `A(η)` map and its gradient.
//! - [`models`]: the model trait plus Poisson, pharmacokinetic and
//!   geostatistical instances.
//! - [`estimate`], [`adam`], [`gda`]: estimators and the optimisation loop.
//! - [`exchange`]: greedy point exchange over clustered designs.
//! - [`score`]: score-function estimators for Gaussian models.
//! - [`posterior`]: importance-sampling posterior for the PK model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod error;
pub mod estimate;
pub mod exchange;
pub mod gda;
pub mod linalg;
pub mod models;
pub mod posterior;
pub mod rng;
pub mod score;

pub use error::{Error, Result};
