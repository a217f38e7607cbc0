//! Manifests written next to every set of outputs. Paths are relative to the
//! directory holding the manifest.

use std::path::Path;

use satmarl_core::marl::Algorithm;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const RUN_MANIFEST: &str = "manifest.json";
pub const EVAL_MANIFEST: &str = "eval_manifest.json";
pub const REPORT_MANIFEST: &str = "report_manifest.json";

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Iterations averaged for a run's final return.
pub const FINAL_WINDOW: usize = 10;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: 0.0, std: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { n, mean, std }
    }
}

/// Mean of the last [`FINAL_WINDOW`] values, or of all if fewer; 0 if none.
pub fn final_value(xs: &[f64]) -> f64 {
    let tail = &xs[xs.len().saturating_sub(FINAL_WINDOW)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyEval {
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_capture_reward: f64,
    pub mean_unique_captures: f64,
    pub total_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub status: SeedStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub iterations: usize,
    pub env_steps: usize,
    pub metrics_file: String,
    pub checkpoint_files: Vec<String>,
    pub final_mean_return: f64,
    pub final_unique_captures: f64,
    pub final_failures: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<GreedyEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_mean_return: Stats,
    pub final_unique_captures: Stats,
    pub final_failures: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub scenario: String,
    pub algorithm: Algorithm,
    pub config_file: String,
    pub config_sha256: String,
    /// The input config text, verbatim.
    pub config_snapshot: String,
    /// Every field after merging with the scenario.
    pub resolved_config: String,
    pub learning_curve_file: String,
    pub seeds: Vec<SeedRecord>,
    pub summary: RunSummary,
}

impl RunManifest {
    pub fn aborted(&self) -> bool {
        self.seeds.iter().any(|s| s.status == SeedStatus::Aborted)
    }

    /// Every file this manifest accounts for.
    pub fn files(&self) -> Vec<String> {
        let mut out = vec![self.config_file.clone(), self.learning_curve_file.clone()];
        for s in &self.seeds {
            out.push(s.metrics_file.clone());
            out.extend(s.checkpoint_files.iter().cloned());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalManifest {
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub run_dir: String,
    pub run_manifest_sha256: String,
    pub episodes: usize,
    pub seed: u64,
    pub train_seeds: Vec<u64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub run_dir: String,
    pub algorithm: Algorithm,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub code_version: String,
    pub created_at: String,
    pub scenario: String,
    pub runs: Vec<ReportInput>,
    pub files: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let v = serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok((v, bytes))
}
