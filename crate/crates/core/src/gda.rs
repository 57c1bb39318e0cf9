//! Gradient descent ascent over `(τ, η)` with parallel replications.
//!
//! Each iteration draws one batch of `K` prior samples and every replication
//! evaluates its gradient on that same batch. The experimenter descends `K`
//! (ascends expected information); the adversary ascends `K`. In FIG mode
//! the adversary is frozen at `η = 0`, which reduces the loop to SGD on the
//! trace criterion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::estimate::{box_penalty_gradient, criterion, grad_k_hat, KGradient, Objective};
use crate::linalg::{
    adversary_gradient, cholesky_unit_det, trace_quadratic_form, AdversaryParams, Matrix,
};
use crate::models::{mean_fisher, ConstraintMode, Design, FisherModel, ThetaSample};
use crate::rng::{stream, uniform, StreamId};
use crate::score::{draw_noise, grad_k_hat_score};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;
pub const DEFAULT_DIAGNOSTIC_J: usize = 1000;
pub const DEFAULT_DIAGNOSTIC_STRIDE: usize = 100;
/// Geostat designs pin against the box walls; larger Adam steps there let
/// points overshoot the box and collide in the corners.
pub const GEOSTAT_LEARNING_RATE: f64 = 1e-3;

/// Calibrated `(design, adversary)` learning rates per model name.
pub fn default_learning_rates(model: &str) -> (f64, f64) {
    match model {
        "geostat" => (GEOSTAT_LEARNING_RATE, GEOSTAT_LEARNING_RATE),
        _ => (DEFAULT_LEARNING_RATE, DEFAULT_LEARNING_RATE),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Average closed-form Fisher matrices over the batch.
    ClosedForm,
    /// Score-function estimator with reparameterised noise (Gaussian models).
    Score,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdaConfig {
    pub objective: Objective,
    pub iterations: usize,
    /// Prior draws per iteration.
    pub samples: usize,
    pub replications: usize,
    pub lr_design: f64,
    pub lr_adversary: f64,
    /// Size of the fixed θ sample for the `Ĵ` diagnostic; 0 disables it.
    pub diagnostic_j: usize,
    pub diagnostic_stride: usize,
    pub seed: u64,
    pub estimator: Estimator,
}

impl Default for GdaConfig {
    fn default() -> Self {
        GdaConfig {
            objective: Objective::Adv,
            iterations: 1000,
            samples: 1,
            replications: 1,
            lr_design: DEFAULT_LEARNING_RATE,
            lr_adversary: DEFAULT_LEARNING_RATE,
            diagnostic_j: 0,
            diagnostic_stride: DEFAULT_DIAGNOSTIC_STRIDE,
            seed: 0,
            estimator: Estimator::ClosedForm,
        }
    }
}

impl GdaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if self.samples == 0 {
            return bad("samples (K) must be >= 1");
        }
        if self.replications == 0 {
            return bad("replications (R) must be >= 1");
        }
        if !(self.lr_design > 0.0) || !(self.lr_adversary >= 0.0) {
            return bad("learning rates must be positive");
        }
        if self.diagnostic_j > 0 && self.diagnostic_stride == 0 {
            return bad("diagnostic_stride must be >= 1 when diagnostics are on");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub replication: usize,
    /// NaN once a replication has diverged.
    pub k_hat: f64,
    pub j_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSnapshot {
    pub iteration: usize,
    pub replication: usize,
    /// Natural coordinates.
    pub design: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GdaTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<DesignSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ReplicationStatus {
    Ok,
    Diverged { iteration: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    pub design: Design,
    pub eta: AdversaryParams,
    pub status: ReplicationStatus,
    /// `Ĵ` of the final design when diagnostics are on.
    pub final_j_hat: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GdaOutput {
    pub replications: Vec<Replication>,
    pub trace: GdaTrace,
    /// The fixed sample used by the `Ĵ` diagnostic (empty when off).
    pub diagnostic_sample: Vec<ThetaSample>,
}

impl GdaOutput {
    pub fn any_diverged(&self) -> bool {
        self.replications
            .iter()
            .any(|r| r.status != ReplicationStatus::Ok)
    }
}

/// `count` designs drawn uniformly over the model's feasible region.
pub fn initial_designs<M: FisherModel + ?Sized>(
    model: &M,
    count: usize,
    seed: u64,
) -> Result<Vec<Design>> {
    let spec = model.spec();
    let mut rng = stream(seed, StreamId::Init);
    let (lo, hi) = spec.region;
    (0..count)
        .map(|_| {
            let natural: Vec<f64> = (0..spec.design_length())
                .map(|_| loop {
                    let v = uniform(&mut rng, lo, hi);
                    // keep logit-transformed starts strictly inside (0, 1)
                    if spec.constraint != ConstraintMode::LogitTransformed || (v > 0.0 && v < 1.0) {
                        break v;
                    }
                })
                .collect();
            Design::from_natural(&natural, spec.constraint)
        })
        .collect()
}

struct RepState {
    design: Design,
    eta: AdversaryParams,
    adam_design: AdamState,
    adam_adversary: AdamState,
    status: ReplicationStatus,
}

struct Batch<'a> {
    thetas: &'a [ThetaSample],
    noise: &'a [Vec<f64>],
}

fn evaluate<M: FisherModel + ?Sized>(
    model: &M,
    estimator: Estimator,
    batch: &Batch<'_>,
    design: &Design,
    eta: &AdversaryParams,
) -> Result<KGradient> {
    match estimator {
        Estimator::ClosedForm => grad_k_hat(model, batch.thetas, design, eta),
        Estimator::Score => grad_k_hat_score(model, batch.thetas, batch.noise, design, eta),
    }
}

impl RepState {
    /// One GDA step on the shared batch. Returns `K̂` at the pre-update point.
    fn step<M: FisherModel + ?Sized>(
        &mut self,
        model: &M,
        config: &GdaConfig,
        batch: &Batch<'_>,
    ) -> Result<f64> {
        let grad = evaluate(model, config.estimator, batch, &self.design, &self.eta)?;
        if !grad.value.is_finite() {
            return Err(Error::NonFinite("K estimate"));
        }
        let penalty = box_penalty_gradient(&self.design);
        let descent: Vec<f64> = grad
            .design
            .iter()
            .zip(&penalty)
            .map(|(g, p)| -(g + p))
            .collect();
        let d_inc = self.adam_design.step(&descent)?;
        let e_inc = match config.objective {
            Objective::Adv => Some(self.adam_adversary.step(&grad.adversary)?),
            Objective::Fig => None,
        };
        let mut coords = self.design.coords.clone();
        for (c, d) in coords.iter_mut().zip(&d_inc) {
            *c += d;
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("design coordinates"));
        }
        self.design.coords = coords;
        if let Some(inc) = e_inc {
            let mut vals = self.eta.values().to_vec();
            for (v, d) in vals.iter_mut().zip(&inc) {
                *v += d;
            }
            self.eta = AdversaryParams::new(self.eta.p(), vals)?;
        }
        Ok(grad.value)
    }
}

/// Runs GDA (or SGD in FIG mode) from the supplied starting designs.
pub fn gda_run<M: FisherModel + ?Sized>(
    model: &M,
    config: &GdaConfig,
    initial: Vec<Design>,
) -> Result<GdaOutput> {
    config.validate()?;
    let spec = model.spec();
    if initial.len() != config.replications {
        return Err(Error::InvalidConfig(format!(
            "{} initial designs for {} replications",
            initial.len(),
            config.replications
        )));
    }
    for d in &initial {
        if d.len() != spec.design_length() {
            return Err(Error::dims(spec.design_length(), d.len()));
        }
    }
    if config.estimator == Estimator::Score && model.gaussian().is_none() {
        return Err(Error::NotGaussian(spec.name.clone()));
    }

    let mut theta_rng = stream(config.seed, StreamId::Theta);
    let mut noise_rng = stream(config.seed, StreamId::Noise);
    let diagnostic_sample = if config.diagnostic_j > 0 {
        let mut rng = stream(config.seed, StreamId::Diagnostic);
        model.sample_prior(config.diagnostic_j, &mut rng)
    } else {
        Vec::new()
    };

    let p = spec.p;
    let mut reps: Vec<RepState> = initial
        .into_iter()
        .map(|design| RepState {
            adam_design: AdamState::new(design.len(), config.lr_design),
            adam_adversary: AdamState::new(AdversaryParams::len_for(p), config.lr_adversary),
            eta: AdversaryParams::zeros(p),
            design,
            status: ReplicationStatus::Ok,
        })
        .collect();

    let r = config.replications;
    let mut trace = GdaTrace {
        rows: Vec::with_capacity(config.iterations * r),
        snapshots: Vec::new(),
    };

    for iteration in 0..config.iterations {
        let thetas = model.sample_prior(config.samples, &mut theta_rng);
        let noise = match config.estimator {
            Estimator::Score => draw_noise(config.samples, spec.design_length(), &mut noise_rng),
            Estimator::ClosedForm => Vec::new(),
        };
        let batch = Batch {
            thetas: &thetas,
            noise: &noise,
        };
        let diag_now = config.diagnostic_j > 0 && iteration % config.diagnostic_stride == 0;

        let results: Vec<(f64, Option<f64>, Option<DesignSnapshot>)> = reps
            .par_iter_mut()
            .enumerate()
            .map(|(rep, st)| {
                if st.status != ReplicationStatus::Ok {
                    return (f64::NAN, None, None);
                }
                let (j, snap) = if diag_now {
                    let natural = st.design.natural();
                    let j = mean_fisher(model, &diagnostic_sample, &natural)
                        .map(|f| criterion(&f, config.objective))
                        .ok();
                    let snap = DesignSnapshot {
                        iteration,
                        replication: rep,
                        design: natural,
                        eta: st.eta.values().to_vec(),
                    };
                    (j, Some(snap))
                } else {
                    (None, None)
                };
                match st.step(model, config, &batch) {
                    Ok(k) => (k, j, snap),
                    Err(e) => {
                        st.status = ReplicationStatus::Diverged {
                            iteration,
                            reason: e.to_string(),
                        };
                        (f64::NAN, j, snap)
                    }
                }
            })
            .collect();

        for (rep, (k, j, snap)) in results.into_iter().enumerate() {
            trace.rows.push(TraceRow {
                iteration,
                replication: rep,
                k_hat: k,
                j_hat: j,
            });
            if let Some(s) = snap {
                trace.snapshots.push(s);
            }
        }
    }

    let replications = reps
        .into_par_iter()
        .map(|st| {
            let final_j_hat = if diagnostic_sample.is_empty() {
                None
            } else {
                mean_fisher(model, &diagnostic_sample, &st.design.natural())
                    .map(|f| criterion(&f, config.objective))
                    .ok()
            };
            Replication {
                design: st.design,
                eta: st.eta,
                status: st.status,
                final_j_hat,
            }
        })
        .collect();

    Ok(GdaOutput {
        replications,
        trace,
        diagnostic_sample,
    })
}

/// Adversary-only ascent of `-tr(A(η)ᵀ M A(η))` for a fixed matrix `M`,
/// starting from `η = 0`. Returns the final η and objective value.
pub fn adversary_ascent(
    m: &Matrix,
    iterations: usize,
    learning_rate: f64,
) -> Result<(AdversaryParams, f64)> {
    let p = m.rows();
    let mut eta = AdversaryParams::zeros(p);
    let mut adam = AdamState::new(AdversaryParams::len_for(p), learning_rate);
    for _ in 0..iterations {
        let g = adversary_gradient(m, &eta)?;
        let inc = adam.step(&g)?;
        let vals: Vec<f64> = eta.values().iter().zip(&inc).map(|(v, d)| v + d).collect();
        eta = AdversaryParams::new(p, vals)?;
    }
    let k = -trace_quadratic_form(&cholesky_unit_det(&eta), m)?;
    Ok((eta, k))
}
