//! Flat `key = value` run configuration. Every key but `model` has a default.

use std::path::{Path, PathBuf};

use advdesign::estimate::Objective;
use advdesign::exchange::{DEFAULT_GEOSTAT_RADIUS, DEFAULT_PK_RADIUS};
use advdesign::gda::{
    default_learning_rates, Estimator, GdaConfig, DEFAULT_DIAGNOSTIC_J, DEFAULT_DIAGNOSTIC_STRIDE,
};
use advdesign::models::{
    AnyModel, GeostatModel, PkModel, PoissonMode, PoissonModel, DEFAULT_PENALTY_WEIGHT,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Config file contents. Unset fields fall back to per-model defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,

    // poisson
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub poisson_mode: Option<PoissonMode>,
    // pk
    pub dose: Option<f64>,
    pub sigma: Option<f64>,
    pub horizon: Option<f64>,
    // geostat
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub length_scale: Option<f64>,
    pub penalty_weight: Option<f64>,
    /// Design points (times or locations).
    pub points: Option<usize>,

    pub objective: Option<Objective>,
    pub iterations: Option<usize>,
    pub samples: Option<usize>,
    pub replications: Option<usize>,
    pub lr_design: Option<f64>,
    pub lr_adversary: Option<f64>,
    pub diagnostic_j: Option<usize>,
    pub diagnostic_stride: Option<usize>,
    pub seed: Option<u64>,
    pub estimator: Option<Estimator>,

    pub out: Option<PathBuf>,
    /// Run point exchange on the final designs of `optimize`.
    pub exchange: Option<bool>,
    pub radius: Option<f64>,
    pub exchange_max_iters: Option<usize>,
}

fn reject_keys(model: &str, keys: &[(&str, bool)]) -> Result<()> {
    for (key, set) in keys {
        if *set {
            return Err(CliError::Config(format!(
                "`{key}` does not apply to model `{model}`"
            )));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.model.as_str();
        let poisson = [
            ("omega1", self.omega1.is_some()),
            ("omega2", self.omega2.is_some()),
            ("poisson_mode", self.poisson_mode.is_some()),
        ];
        let pk = [
            ("dose", self.dose.is_some()),
            ("sigma", self.sigma.is_some()),
            ("horizon", self.horizon.is_some()),
        ];
        let geo = [
            ("sigma1", self.sigma1.is_some()),
            ("sigma2", self.sigma2.is_some()),
            ("length_scale", self.length_scale.is_some()),
            ("penalty_weight", self.penalty_weight.is_some()),
        ];
        match name {
            "poisson" => {
                reject_keys(name, &pk)?;
                reject_keys(name, &geo)?;
                reject_keys(name, &[("points", self.points.is_some())])?;
            }
            "pk" => {
                reject_keys(name, &poisson)?;
                reject_keys(name, &geo)?;
            }
            "geostat" => {
                reject_keys(name, &poisson)?;
                reject_keys(name, &pk)?;
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown model `{other}` (expected poisson, pk or geostat)"
                )))
            }
        }
        if self.estimator == Some(Estimator::Score) && name != "pk" {
            return Err(CliError::Config(
                "estimator = \"score\" requires model = \"pk\"".into(),
            ));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return Err(CliError::Config("radius must be positive".into()));
            }
        }
        self.build_model()?;
        self.gda_config().validate()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<AnyModel> {
        let model = match self.model.as_str() {
            "poisson" => AnyModel::Poisson(PoissonModel::new(
                self.omega1.unwrap_or(2.0),
                self.omega2.unwrap_or(1.0),
                self.poisson_mode.unwrap_or(PoissonMode::Exact),
            )?),
            "pk" => {
                let d = PkModel::default();
                AnyModel::Pk(PkModel::new(
                    self.dose.unwrap_or(d.dose()),
                    self.sigma.unwrap_or(0.1),
                    self.points.unwrap_or(15),
                    self.horizon.unwrap_or(24.0),
                )?)
            }
            "geostat" => AnyModel::Geostat(GeostatModel::new(
                self.sigma1.unwrap_or(1.0),
                self.sigma2.unwrap_or(3.0),
                self.length_scale.unwrap_or(0.01),
                self.points.unwrap_or(100),
                self.penalty_weight.unwrap_or(DEFAULT_PENALTY_WEIGHT),
            )?),
            other => AnyModel::by_name(other)?,
        };
        Ok(model)
    }

    pub fn gda_config(&self) -> GdaConfig {
        let (lr_d, lr_a) = default_learning_rates(&self.model);
        GdaConfig {
            objective: self.objective.unwrap_or(Objective::Adv),
            iterations: self.iterations.unwrap_or(1000),
            samples: self.samples.unwrap_or(1),
            replications: self.replications.unwrap_or(1),
            lr_design: self.lr_design.unwrap_or(lr_d),
            lr_adversary: self.lr_adversary.unwrap_or(lr_a),
            diagnostic_j: self.diagnostic_j.unwrap_or(DEFAULT_DIAGNOSTIC_J),
            diagnostic_stride: self.diagnostic_stride.unwrap_or(DEFAULT_DIAGNOSTIC_STRIDE),
            seed: self.seed.unwrap_or(0),
            estimator: self.estimator.unwrap_or(Estimator::ClosedForm),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(if self.model == "geostat" {
            DEFAULT_GEOSTAT_RADIUS
        } else {
            DEFAULT_PK_RADIUS
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// The config with every default made explicit, as echoed into outputs.
    pub fn resolved(&self) -> RunConfig {
        let g = self.gda_config();
        let mut r = self.clone();
        r.objective = Some(g.objective);
        r.iterations = Some(g.iterations);
        r.samples = Some(g.samples);
        r.replications = Some(g.replications);
        r.lr_design = Some(g.lr_design);
        r.lr_adversary = Some(g.lr_adversary);
        r.diagnostic_j = Some(g.diagnostic_j);
        r.diagnostic_stride = Some(g.diagnostic_stride);
        r.seed = Some(g.seed);
        r.estimator = Some(g.estimator);
        r.exchange = Some(self.exchange.unwrap_or(false));
        r.radius = Some(self.radius());
        r.out = None;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_toml("model = \"poisson\"").unwrap();
        let g = c.gda_config();
        assert_eq!(g.iterations, 1000);
        assert_eq!(g.replications, 1);
        assert_eq!(g.lr_design, 1e-2);
        assert_eq!(c.radius(), DEFAULT_PK_RADIUS);
    }

    #[test]
    fn model_is_required() {
        assert!(RunConfig::from_toml("iterations = 5").is_err());
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        assert!(RunConfig::from_toml("model = \"pk\"\nbogus = 1").is_err());
        assert!(RunConfig::from_toml("model = \"pk\"\nomega1 = 3.0").is_err());
        assert!(RunConfig::from_toml("model = \"nope\"").is_err());
        assert!(RunConfig::from_toml("model = \"poisson\"\nestimator = \"score\"").is_err());
        assert!(RunConfig::from_toml("model = \"pk\"\nestimator = \"score\"").is_ok());
    }

    #[test]
    fn geostat_uses_calibrated_rates() {
        let c = RunConfig::from_toml("model = \"geostat\"\npoints = 10").unwrap();
        assert_eq!(c.gda_config().lr_design, 1e-3);
        assert_eq!(c.radius(), DEFAULT_GEOSTAT_RADIUS);
        let c = RunConfig::from_toml("model = \"geostat\"\nlr_design = 0.05").unwrap();
        assert_eq!(c.gda_config().lr_design, 0.05);
    }

    #[test]
    fn invalid_constants_are_config_errors() {
        let e = RunConfig::from_toml("model = \"poisson\"\nomega1 = 0.5").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(RunConfig::from_toml("model = \"pk\"\niterations = 0").is_err());
    }
}
