//! Output files: `designs.json`, `trace.csv`, `designs_trace.csv` and
//! `posterior.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use advdesign::estimate::Objective;
use advdesign::gda::{GdaTrace, ReplicationStatus};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const DESIGNS_FILE: &str = "designs.json";
pub const EXCHANGED_FILE: &str = "designs_exchanged.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const DESIGNS_TRACE_FILE: &str = "designs_trace.csv";
pub const POSTERIOR_FILE: &str = "posterior.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignArtifact {
    pub model: String,
    pub objective: Objective,
    pub seed: u64,
    /// Resolved run configuration.
    pub config: RunConfig,
    pub replications: Vec<ReplicationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// Natural design coordinates, flattened point by point.
    pub design: Vec<f64>,
    pub eta: Vec<f64>,
    pub j_hat: Option<f64>,
    pub status: ReplicationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeRecord {
    pub design_before: Vec<f64>,
    pub j_hat_before: f64,
    pub j_hat_after: f64,
    pub iterations: usize,
    pub cluster_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorArtifact {
    pub model: String,
    pub seed: u64,
    pub sigma: f64,
    pub theta_true: Vec<f64>,
    pub design: Vec<f64>,
    pub observations: Vec<f64>,
    pub effective_sample_size: f64,
    pub degenerate: bool,
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_designs(path: &Path) -> Result<DesignArtifact> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `iter,rep,k_hat,j_hat`, one row per iteration and replication; `j_hat` is
/// empty off the diagnostic stride.
pub fn trace_csv(trace: &GdaTrace) -> String {
    let mut s = String::from("iter,rep,k_hat,j_hat\n");
    for r in &trace.rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.iteration,
            r.replication,
            r.k_hat,
            fmt_opt(r.j_hat)
        );
    }
    s
}

/// `iter,rep,coord,value` for every snapshot coordinate.
pub fn designs_trace_csv(trace: &GdaTrace) -> String {
    let mut s = String::from("iter,rep,coord,value\n");
    for snap in &trace.snapshots {
        for (k, v) in snap.design.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", snap.iteration, snap.replication, k, v);
        }
    }
    s
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use advdesign::gda::{DesignSnapshot, TraceRow};

    #[test]
    fn csv_layout() {
        let trace = GdaTrace {
            rows: vec![
                TraceRow {
                    iteration: 0,
                    replication: 0,
                    k_hat: -1.5,
                    j_hat: Some(2.0),
                },
                TraceRow {
                    iteration: 0,
                    replication: 1,
                    k_hat: f64::NAN,
                    j_hat: None,
                },
            ],
            snapshots: vec![DesignSnapshot {
                iteration: 0,
                replication: 0,
                design: vec![0.25, 0.5],
                eta: vec![0.0],
            }],
        };
        assert_eq!(
            trace_csv(&trace),
            "iter,rep,k_hat,j_hat\n0,0,-1.5,2\n0,1,NaN,\n"
        );
        assert_eq!(
            designs_trace_csv(&trace),
            "iter,rep,coord,value\n0,0,0,0.25\n0,0,1,0.5\n"
        );
    }
}
