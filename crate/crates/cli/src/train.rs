use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use satmarl_core::marl::{evaluate, IterationMetrics, Trainer};
use satmarl_core::nn::save_params;
use satmarl_core::EnvConfig;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::manifest::{
    final_value, now_rfc3339, sha256_hex, write_json, GreedyEval, RunManifest, RunSummary, SeedRecord, SeedStatus,
    Stats, CODE_VERSION, RUN_MANIFEST,
};

pub const CONFIG_COPY: &str = "config.toml";
pub const LEARNING_CURVE: &str = "learning_curve.csv";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Seeds trained at once; 0 uses every core.
    pub workers: usize,
    /// Replaces the config's output directory.
    pub output_dir: Option<PathBuf>,
    /// Replace an existing run in the output directory.
    pub force: bool,
    pub quiet: bool,
}

/// One learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub env_steps: usize,
    pub seed: u64,
    pub mean_return: f64,
    pub unique_captures: f64,
    pub failures: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

pub fn metrics_file(seed: u64) -> String {
    format!("metrics_seed{seed}.jsonl")
}

pub fn checkpoint_dir(seed: u64) -> String {
    format!("checkpoints/seed{seed}")
}

/// Load a config file and train every seed.
pub fn cmd_train(config_path: &Path, opts: &TrainOptions) -> Result<TrainOutcome> {
    let (cfg, raw) = ExperimentConfig::load(config_path)?;
    run_experiment(&cfg, &raw, opts)
}

pub fn run_experiment(cfg: &ExperimentConfig, raw: &str, opts: &TrainOptions) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env_cfg = cfg.env_config()?;
    let run_dir = match &opts.output_dir {
        Some(d) => d.clone(),
        None => cfg.resolved_output_dir(),
    };
    prepare_dir(&run_dir, opts.force)?;
    let started_at = now_rfc3339();
    let config_path = run_dir.join(CONFIG_COPY);
    std::fs::write(&config_path, raw).map_err(|e| CliError::io(&config_path, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| CliError::config(e.to_string()))?;
    let results: Vec<Result<(SeedRecord, Vec<IterationMetrics>)>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let r = train_seed(cfg, &env_cfg, seed, &run_dir);
                if !opts.quiet {
                    match &r {
                        Ok((rec, _)) if rec.status == SeedStatus::Completed => eprintln!(
                            "seed {seed}: {} iterations, final return {:.3}",
                            rec.iterations, rec.final_mean_return
                        ),
                        Ok((rec, _)) => eprintln!("seed {seed}: aborted: {}", rec.error.as_deref().unwrap_or("")),
                        Err(e) => eprintln!("seed {seed}: {e}"),
                    }
                }
                r
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut curves = Vec::new();
    for r in results {
        let (rec, metrics) = r?;
        curves.push((rec.seed, metrics));
        records.push(rec);
    }

    let curve_path = run_dir.join(LEARNING_CURVE);
    write_curve(&curve_path, &curves)?;

    let pick = |f: fn(&SeedRecord) -> f64| -> Vec<f64> {
        records.iter().filter(|r| r.status == SeedStatus::Completed).map(f).collect()
    };
    let summary = RunSummary {
        final_mean_return: Stats::of(&pick(|r| r.final_mean_return)),
        final_unique_captures: Stats::of(&pick(|r| r.final_unique_captures)),
        final_failures: Stats::of(&pick(|r| r.final_failures)),
    };
    let manifest = RunManifest {
        code_version: CODE_VERSION.to_owned(),
        started_at,
        finished_at: now_rfc3339(),
        scenario: cfg.scenario.clone(),
        algorithm: cfg.algorithm,
        config_file: CONFIG_COPY.to_owned(),
        config_sha256: sha256_hex(raw.as_bytes()),
        config_snapshot: raw.to_owned(),
        resolved_config: cfg.to_toml(),
        learning_curve_file: LEARNING_CURVE.to_owned(),
        seeds: records,
        summary,
    };
    write_json(&run_dir.join(RUN_MANIFEST), &manifest)?;
    Ok(TrainOutcome { run_dir, manifest })
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.join(RUN_MANIFEST).exists() {
        if !force {
            return Err(CliError::config(format!(
                "{} already holds a run; pass --force to replace it",
                dir.display()
            )));
        }
        std::fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_curve(path: &Path, curves: &[(u64, Vec<IterationMetrics>)]) -> Result<()> {
    let io = |e: csv::Error| CliError::config(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for (seed, metrics) in curves {
        for m in metrics {
            w.serialize(CurveRow {
                env_steps: m.env_steps,
                seed: *seed,
                mean_return: m.mean_return,
                unique_captures: m.unique_captures,
                failures: m.failures,
                entropy: m.entropy,
                clip_fraction: m.clip_fraction,
            })
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn train_seed(
    cfg: &ExperimentConfig,
    env_cfg: &EnvConfig,
    seed: u64,
    run_dir: &Path,
) -> Result<(SeedRecord, Vec<IterationMetrics>)> {
    let metrics_name = metrics_file(seed);
    let metrics_path = run_dir.join(&metrics_name);
    let file = File::create(&metrics_path).map_err(|e| CliError::io(&metrics_path, e))?;
    let mut out = BufWriter::new(file);

    let mut rec = SeedRecord {
        seed,
        status: SeedStatus::Completed,
        error: None,
        iterations: 0,
        env_steps: 0,
        metrics_file: metrics_name,
        checkpoint_files: Vec::new(),
        final_mean_return: 0.0,
        final_unique_captures: 0.0,
        final_failures: 0.0,
        eval: None,
    };

    let mut trainer = Trainer::new(cfg.algorithm, env_cfg.clone(), cfg.train.clone(), seed)?;
    let mut failure = None;
    while !trainer.is_finished() {
        match trainer.run_iteration() {
            Ok(m) => {
                let line = serde_json::to_string(&m).map_err(|e| CliError::Numeric(e.to_string()))?;
                writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| CliError::io(&metrics_path, e))?;
            }
            Err(e) => {
                failure = Some(CliError::from(e));
                break;
            }
        }
    }
    let metrics = trainer.metrics().to_vec();
    rec.iterations = metrics.len();
    rec.env_steps = metrics.last().map_or(0, |m| m.env_steps);
    let series = |f: fn(&IterationMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
    rec.final_mean_return = final_value(&series(|m| m.mean_return));
    rec.final_unique_captures = final_value(&series(|m| m.unique_captures));
    rec.final_failures = final_value(&series(|m| m.failures));

    if let Some(e) = failure {
        return abort(rec, e, metrics);
    }

    let agents = trainer.into_agents();
    let dir_name = checkpoint_dir(seed);
    let dir = run_dir.join(&dir_name);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let nets = agents
        .actors
        .iter()
        .enumerate()
        .map(|(i, a)| (format!("actor_{i}.bin"), &a.params))
        .chain(agents.critics.iter().enumerate().map(|(j, c)| (format!("critic_{j}.bin"), &c.params)));
    for (name, params) in nets {
        let path = dir.join(&name);
        save_params(&path, params).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        rec.checkpoint_files.push(format!("{dir_name}/{name}"));
    }

    match evaluate(&agents, env_cfg, cfg.train.eval_episodes, seed) {
        Ok(ev) => {
            rec.eval = Some(GreedyEval {
                episodes: ev.episodes,
                mean_return: ev.mean_return,
                mean_capture_reward: ev.mean_capture_reward,
                mean_unique_captures: ev.mean_unique_captures,
                total_failures: ev.total_failures,
            });
            Ok((rec, metrics))
        }
        Err(e) => abort(rec, CliError::from(e), metrics),
    }
}

fn abort(
    mut rec: SeedRecord,
    e: CliError,
    metrics: Vec<IterationMetrics>,
) -> Result<(SeedRecord, Vec<IterationMetrics>)> {
    match e {
        CliError::Numeric(msg) => {
            rec.status = SeedStatus::Aborted;
            rec.error = Some(msg);
            Ok((rec, metrics))
        }
        other => Err(other),
    }
}
