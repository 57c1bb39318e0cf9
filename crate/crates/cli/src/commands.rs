use std::path::{Path, PathBuf};

use advdesign::estimate::Objective;
use advdesign::exchange::{candidate_pool, cluster_design, point_exchange};
use advdesign::gda::{gda_run, initial_designs, ReplicationStatus, DEFAULT_DIAGNOSTIC_J};
use advdesign::models::{AnyModel, FisherModel, PkModel, ThetaSample};
use advdesign::posterior::sample_posterior;
use advdesign::rng::{stream, StreamId};

use crate::artifact::{
    designs_trace_csv, ensure_dir, read_designs, trace_csv, write_file, write_json, DesignArtifact,
    ExchangeRecord, PosteriorArtifact, ReplicationRecord, DESIGNS_FILE, DESIGNS_TRACE_FILE,
    EXCHANGED_FILE, POSTERIOR_FILE, TRACE_FILE,
};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// The fixed θ̃ sample behind `Ĵ`, identical to the one `gda_run` draws.
fn fixed_sample(model: &AnyModel, seed: u64, j: usize) -> Vec<ThetaSample> {
    let j = if j == 0 { DEFAULT_DIAGNOSTIC_J } else { j };
    model.sample_prior(j, &mut stream(seed, StreamId::Diagnostic))
}

fn exchange_one(
    model: &AnyModel,
    fixed: &[ThetaSample],
    rec: &mut ReplicationRecord,
    kind: Objective,
    cfg: &RunConfig,
) -> Result<()> {
    if rec.status != ReplicationStatus::Ok {
        return Ok(());
    }
    let spec = model.spec();
    if rec.design.len() != spec.design_length() {
        return Err(CliError::Config(format!(
            "replication {} has {} coordinates, model expects {}",
            rec.replication,
            rec.design.len(),
            spec.design_length()
        )));
    }
    let radius = cfg.radius();
    let pool = candidate_pool(&rec.design, spec.coord_dim, radius);
    let max_iters = cfg.exchange_max_iters.unwrap_or(spec.points * pool.len());
    let ex = point_exchange(model, fixed, &rec.design, &pool, kind, max_iters)?;
    let counts = cluster_design(&ex.design, spec.coord_dim, radius).counts;
    rec.exchange = Some(ExchangeRecord {
        design_before: std::mem::replace(&mut rec.design, ex.design),
        j_hat_before: ex.j_hat_before,
        j_hat_after: ex.j_hat_after,
        iterations: ex.iterations,
        cluster_counts: counts,
    });
    rec.j_hat = Some(ex.j_hat_after);
    Ok(())
}

#[derive(Debug)]
pub struct OptimizeSummary {
    pub out_dir: PathBuf,
    pub artifact: DesignArtifact,
}

/// Runs GDA, optionally followed by point exchange, and writes
/// `designs.json`, `trace.csv` and `designs_trace.csv` into the output
/// directory. Outputs are written even when replications diverge.
pub fn run_optimize(
    cfg: &RunConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<OptimizeSummary> {
    let mut cfg = cfg.clone();
    if seed.is_some() {
        cfg.seed = seed;
    }
    if out.is_some() {
        cfg.out = out;
    }
    cfg.validate()?;
    let model = cfg.build_model()?;
    let gda = cfg.gda_config();
    let out_dir = ensure_dir(&cfg.out_dir())?;

    let init = initial_designs(&model, gda.replications, gda.seed)?;
    let output = gda_run(&model, &gda, init)?;

    let mut records: Vec<ReplicationRecord> = output
        .replications
        .iter()
        .enumerate()
        .map(|(i, r)| ReplicationRecord {
            replication: i,
            design: r.design.natural(),
            eta: r.eta.values().to_vec(),
            j_hat: r.final_j_hat,
            status: r.status.clone(),
            exchange: None,
        })
        .collect();

    if cfg.exchange.unwrap_or(false) {
        let fixed = if output.diagnostic_sample.is_empty() {
            fixed_sample(&model, gda.seed, gda.diagnostic_j)
        } else {
            output.diagnostic_sample.clone()
        };
        for rec in &mut records {
            exchange_one(&model, &fixed, rec, gda.objective, &cfg)?;
        }
    }

    let artifact = DesignArtifact {
        model: cfg.model.clone(),
        objective: gda.objective,
        seed: gda.seed,
        config: cfg.resolved(),
        replications: records,
    };
    write_file(&out_dir.join(TRACE_FILE), &trace_csv(&output.trace))?;
    write_file(
        &out_dir.join(DESIGNS_TRACE_FILE),
        &designs_trace_csv(&output.trace),
    )?;
    write_json(&out_dir.join(DESIGNS_FILE), &artifact)?;

    let diverged = artifact
        .replications
        .iter()
        .filter(|r| r.status != ReplicationStatus::Ok)
        .count();
    if diverged > 0 {
        return Err(CliError::Diverged(diverged));
    }
    Ok(OptimizeSummary { out_dir, artifact })
}

/// Point exchange over every replication of an earlier `optimize` run.
/// Writes `designs_exchanged.json`.
pub fn run_exchange(
    cfg: &RunConfig,
    designs: &Path,
    out: Option<PathBuf>,
) -> Result<OptimizeSummary> {
    cfg.validate()?;
    let mut artifact = read_designs(designs)?;
    if artifact.model != cfg.model {
        return Err(CliError::Config(format!(
            "designs file is for model `{}` but config names `{}`",
            artifact.model, cfg.model
        )));
    }
    let model = cfg.build_model()?;
    let j = cfg
        .diagnostic_j
        .or(artifact.config.diagnostic_j)
        .unwrap_or(DEFAULT_DIAGNOSTIC_J);
    let fixed = fixed_sample(&model, artifact.seed, j);
    for rec in &mut artifact.replications {
        exchange_one(&model, &fixed, rec, artifact.objective, cfg)?;
    }
    artifact.config.exchange = Some(true);
    artifact.config.radius = Some(cfg.radius());
    let out_dir = ensure_dir(&out.unwrap_or_else(|| cfg.out_dir()))?;
    write_json(&out_dir.join(EXCHANGED_FILE), &artifact)?;
    Ok(OptimizeSummary { out_dir, artifact })
}

#[derive(Clone, Debug)]
pub struct PosteriorRequest {
    pub designs: PathBuf,
    pub theta: Vec<f64>,
    pub samples: usize,
    pub replication: usize,
    pub seed: u64,
    /// Replaces the noise scale of the design run.
    pub sigma: Option<f64>,
    pub out: PathBuf,
}

/// Importance-sampling posterior for one PK design; writes `posterior.json`.
pub fn run_posterior(req: &PosteriorRequest) -> Result<PosteriorArtifact> {
    let artifact = read_designs(&req.designs)?;
    if artifact.model != "pk" {
        return Err(CliError::Config(format!(
            "posterior needs a pk design, got `{}`",
            artifact.model
        )));
    }
    let mut cfg = artifact.config.clone();
    if req.sigma.is_some() {
        cfg.sigma = req.sigma;
    }
    let model = match cfg.build_model()? {
        AnyModel::Pk(m) => m,
        _ => unreachable!("model checked above"),
    };
    if req.theta.len() != 3 {
        return Err(CliError::Config(format!(
            "--theta needs 3 values, got {}",
            req.theta.len()
        )));
    }
    let rec = artifact
        .replications
        .iter()
        .find(|r| r.replication == req.replication)
        .ok_or_else(|| {
            CliError::Config(format!(
                "no replication {} in designs file",
                req.replication
            ))
        })?;
    let spec = model.spec();
    if rec.design.len() != spec.design_length() {
        return Err(CliError::Config(format!(
            "design has {} times, model expects {}",
            rec.design.len(),
            spec.design_length()
        )));
    }
    let truth = ThetaSample(req.theta.clone());
    let post = sample_posterior(&model, &rec.design, &truth, req.samples, req.seed)?;
    let out = PosteriorArtifact {
        model: artifact.model.clone(),
        seed: req.seed,
        sigma: sigma_of(&model),
        theta_true: req.theta.clone(),
        design: rec.design.clone(),
        degenerate: post.degenerate(),
        effective_sample_size: post.effective_sample_size,
        observations: post.observations,
        samples: post.samples.into_iter().map(|s| s.0).collect(),
        weights: post.weights,
    };
    let dir = ensure_dir(&req.out)?;
    write_json(&dir.join(POSTERIOR_FILE), &out)?;
    Ok(out)
}

fn sigma_of(model: &PkModel) -> f64 {
    advdesign::models::GaussianModel::sigma(model)
}
