use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::eval::read_run_manifest;
use crate::manifest::{now_rfc3339, sha256_hex, write_json, ReportInput, ReportManifest, Stats, CODE_VERSION, REPORT_MANIFEST};
use crate::train::CurveRow;

pub const CURVES: &str = "curves.csv";
pub const SUMMARY: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub algorithm: String,
    pub scenario: String,
    pub env_steps: usize,
    pub seed: u64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub scenario: String,
    pub env_steps: usize,
    pub n_seeds: usize,
    pub mean_return: f64,
    /// Sample standard deviation across seeds.
    pub std_return: f64,
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub out_dir: PathBuf,
    pub curves: Vec<TidyRow>,
    pub summary: Vec<SummaryRow>,
    pub manifest: ReportManifest,
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let err = |e: csv::Error| CliError::config(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().map(|row| row.map_err(err)).collect()
}

/// Merge the learning curves of runs on one scenario.
pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<ReportOutcome> {
    if run_dirs.is_empty() {
        return Err(CliError::config("report needs at least one run directory"));
    }
    let mut key: Option<(String, PathBuf)> = None;
    let mut scenario = String::new();
    let mut inputs = Vec::new();
    let mut curves = Vec::new();
    let mut seen = BTreeSet::new();
    for dir in run_dirs {
        let (manifest, bytes) = read_run_manifest(dir)?;
        let cfg: ExperimentConfig = toml::from_str(&manifest.resolved_config)
            .map_err(|e| CliError::config(format!("{}: resolved config: {e}", dir.display())))?;
        let k = cfg.environment_key();
        match &key {
            None => {
                key = Some((k, dir.clone()));
                scenario = cfg.scenario.clone();
            }
            Some((k0, d0)) if *k0 != k => {
                let what = if cfg.scenario != scenario { "scenario" } else { "environment settings of scenario" };
                return Err(CliError::config(format!(
                    "cannot mix runs: {} uses {what} `{}` but {} uses `{scenario}`",
                    dir.display(),
                    cfg.scenario,
                    d0.display()
                )));
            }
            Some(_) => {}
        }
        let algorithm = manifest.algorithm.to_string();
        for row in read_curve(&dir.join(&manifest.learning_curve_file))? {
            if !seen.insert((algorithm.clone(), row.seed, row.env_steps)) {
                return Err(CliError::config(format!(
                    "{algorithm} seed {} appears in more than one run",
                    row.seed
                )));
            }
            curves.push(TidyRow {
                algorithm: algorithm.clone(),
                scenario: cfg.scenario.clone(),
                env_steps: row.env_steps,
                seed: row.seed,
                mean_return: row.mean_return,
            });
        }
        inputs.push(ReportInput {
            run_dir: dir.display().to_string(),
            algorithm: manifest.algorithm,
            manifest_sha256: sha256_hex(&bytes),
        });
    }
    curves.sort_by(|a, b| (&a.algorithm, a.seed, a.env_steps).cmp(&(&b.algorithm, b.seed, b.env_steps)));

    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in &curves {
        groups.entry((r.algorithm.clone(), r.env_steps)).or_default().push(r.mean_return);
    }
    let summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((algorithm, env_steps), xs)| {
            let s = Stats::of(&xs);
            SummaryRow { algorithm, scenario: scenario.clone(), env_steps, n_seeds: s.n, mean_return: s.mean, std_return: s.std }
        })
        .collect();

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_rows(&out_dir.join(CURVES), &curves)?;
    write_rows(&out_dir.join(SUMMARY), &summary)?;
    let manifest = ReportManifest {
        code_version: CODE_VERSION.to_owned(),
        created_at: now_rfc3339(),
        scenario,
        runs: inputs,
        files: vec![CURVES.into(), SUMMARY.into()],
    };
    write_json(&out_dir.join(REPORT_MANIFEST), &manifest)?;
    Ok(ReportOutcome { out_dir: out_dir.to_path_buf(), curves, summary, manifest })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let err = |e: csv::Error| CliError::config(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
