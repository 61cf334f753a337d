use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricSummary;

pub const RECORD_FILE: &str = "record.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Ridge head outcome for one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeOutcome {
    pub lambda: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
    pub test_accuracy: f64,
}

/// Files written for one repeat, relative to the record's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepeatArtifacts {
    pub checkpoint: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// `(N, Z)` NPY array, rows in the order of `latent_ids`.
    pub latents: Option<PathBuf>,
    pub latent_ids: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    pub validation_fold: usize,
    pub purity: f64,
    pub overlaps: usize,
    pub validation_purity: f64,
    pub validation_loss: f64,
    pub final_train_loss: f64,
    pub cluster_iterations: usize,
    pub cluster_degenerate: bool,
    pub ridge: Option<RidgeOutcome>,
    pub fc_accuracy: Option<f64>,
    pub stage_seconds: BTreeMap<String, f64>,
    pub artifacts: RepeatArtifacts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub dataset_name: String,
    pub algorithm: String,
    pub latent_dim: usize,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub extractor_sha256: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub repeats: Vec<RepeatRecord>,
    pub purity: Option<MetricSummary>,
    pub overlaps: Option<MetricSummary>,
    pub validation_purity: Option<MetricSummary>,
    pub ridge_accuracy: Option<MetricSummary>,
    pub fc_accuracy: Option<MetricSummary>,
    /// Whole run, data preparation included.
    pub wall_clock_seconds: f64,
    /// Seconds per stage summed over repeats; `extract` covers data
    /// preparation, which is shared by all repeats.
    pub stage_seconds: BTreeMap<String, f64>,
}

/// One line of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricLine {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<f64>,
    pub config_hash: String,
}

impl ExperimentRecord {
    /// Re-hashes the config snapshot and compares with the stored hash.
    pub fn verify_hash(&self) -> Result<()> {
        let found = self.config.hash()?;
        if found != self.config_hash {
            return Err(Error::Checksum {
                what: format!("config snapshot of {}", self.name),
                expected: self.config_hash.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads a record and checks its config hash.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rec: Self = serde_json::from_str(&text)?;
        rec.verify_hash()?;
        Ok(rec)
    }

    /// Time for extraction through clustering, summed over repeats.
    pub fn pipeline_seconds(&self) -> f64 {
        ["extract", "train", "encode", "cluster"]
            .iter()
            .filter_map(|s| self.stage_seconds.get(*s))
            .sum()
    }

    pub fn metric_lines(&self) -> Vec<MetricLine> {
        let named = [
            ("purity", &self.purity),
            ("overlaps", &self.overlaps),
            ("validation_purity", &self.validation_purity),
            ("ridge_accuracy", &self.ridge_accuracy),
            ("fc_accuracy", &self.fc_accuracy),
        ];
        named
            .into_iter()
            .filter_map(|(name, s)| {
                s.as_ref().map(|s| MetricLine {
                    metric: name.to_string(),
                    mean: s.mean,
                    std: s.std,
                    runs: s.runs.clone(),
                    config_hash: self.config_hash.clone(),
                })
            })
            .collect()
    }

    /// `purity ± std (overlaps ± std)` cell text.
    pub fn cell(&self) -> String {
        match (&self.purity, &self.overlaps) {
            (Some(p), Some(o)) => format!("{:.2} ± {:.2} ({:.1} ± {:.1})", p.mean, p.std, o.mean, o.std),
            _ => "n/a".to_string(),
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {} Z={}: {}",
            self.dataset_name,
            self.algorithm,
            self.latent_dim,
            self.cell()
        )
    }
}
