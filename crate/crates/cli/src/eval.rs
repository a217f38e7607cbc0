use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use satmarl_core::marl::{evaluate, AgentSet, EvalMetrics};
use satmarl_core::nn::load_params;
use satmarl_core::ActionKind;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::manifest::{
    now_rfc3339, read_json, sha256_hex, write_json, EvalManifest, RunManifest, SeedStatus, CODE_VERSION,
    EVAL_MANIFEST, RUN_MANIFEST,
};

pub const EVAL_JSON: &str = "eval.json";
pub const ACTION_FREQUENCIES: &str = "action_frequencies.csv";
pub const CAPTURE_HISTOGRAM: &str = "capture_histogram.csv";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Evaluate only this training seed's checkpoint.
    pub train_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEval {
    pub train_seed: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub returns: Vec<f64>,
    pub mean_capture_reward: f64,
    pub mean_unique_captures: f64,
    pub total_failures: usize,
    pub agent_unique_captures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: String,
    pub algorithm: String,
    pub episodes: usize,
    pub seed: u64,
    pub per_seed: Vec<SeedEval>,
    pub mean_return: f64,
    pub mean_capture_reward: f64,
    pub mean_unique_captures: f64,
    pub total_failures: usize,
    /// Mean over training seeds of each agent's unique captures per episode.
    pub agent_unique_captures: Vec<f64>,
    /// Summed over training seeds.
    pub active_steps: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRow {
    pub agent: usize,
    pub action: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub agent: usize,
    pub target_id: usize,
    pub count: u64,
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub out_dir: PathBuf,
    pub report: EvalReport,
    pub manifest: EvalManifest,
}

/// Load a run's config and the trained networks for one seed.
pub fn load_agents(run_dir: &Path, manifest: &RunManifest, seed: u64) -> Result<(ExperimentConfig, AgentSet)> {
    let cfg: ExperimentConfig = toml::from_str(&manifest.resolved_config)
        .map_err(|e| CliError::config(format!("{}: resolved config: {e}", run_dir.display())))?;
    let rec = manifest
        .seeds
        .iter()
        .find(|r| r.seed == seed)
        .ok_or_else(|| CliError::config(format!("run has no seed {seed}")))?;
    if rec.status != SeedStatus::Completed {
        return Err(CliError::config(format!("seed {seed} did not complete training")));
    }
    let load = |prefix: &str| -> Result<Vec<_>> {
        rec.checkpoint_files
            .iter()
            .filter(|f| f.rsplit('/').next().is_some_and(|n| n.starts_with(prefix)))
            .map(|f| {
                let path = run_dir.join(f);
                load_params(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
            })
            .collect()
    };
    let env = cfg.env_config()?;
    let agents = AgentSet::from_params(
        cfg.algorithm,
        env.n_sats(),
        env.obs_dim(),
        env.state_dim(),
        load("actor_")?,
        load("critic_")?,
        cfg.train.lr,
    )
    .map_err(|e| CliError::config(format!("{}: {e}", run_dir.display())))?;
    Ok((cfg, agents))
}

pub fn read_run_manifest(run_dir: &Path) -> Result<(RunManifest, Vec<u8>)> {
    let path = run_dir.join(RUN_MANIFEST);
    if !path.exists() {
        return Err(CliError::config(format!("{} has no {RUN_MANIFEST}", run_dir.display())));
    }
    read_json(&path)
}

pub fn cmd_eval(run_dir: &Path, opts: &EvalOptions) -> Result<EvalOutcome> {
    let started_at = now_rfc3339();
    let (manifest, bytes) = read_run_manifest(run_dir)?;
    let seeds: Vec<u64> = match opts.train_seed {
        Some(s) => vec![s],
        None => manifest.seeds.iter().filter(|r| r.status == SeedStatus::Completed).map(|r| r.seed).collect(),
    };
    if seeds.is_empty() {
        return Err(CliError::config("run has no completed seeds"));
    }

    let mut runs: Vec<(u64, EvalMetrics)> = Vec::new();
    let mut cfg = None;
    for &s in &seeds {
        let (c, agents) = load_agents(run_dir, &manifest, s)?;
        let env = c.env_config()?;
        runs.push((s, evaluate(&agents, &env, opts.episodes, opts.seed)?));
        cfg = Some(c);
    }
    let cfg = cfg.expect("at least one seed");
    let k = cfg.env.k_slots;
    let n = cfg.n_sats();

    let out_dir = opts.output_dir.clone().unwrap_or_else(|| {
        let mut name = format!("eval/seed{}_ep{}", opts.seed, opts.episodes);
        if let Some(t) = opts.train_seed {
            name.push_str(&format!("_train{t}"));
        }
        run_dir.join(name)
    });
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;

    let ns = runs.len() as f64;
    let mean = |f: fn(&EvalMetrics) -> f64| runs.iter().map(|(_, m)| f(m)).sum::<f64>() / ns;
    let mut agent_unique = vec![0.0; n];
    let mut active_steps = vec![0u64; n];
    let mut counts = vec![vec![0u64; 3 + k]; n];
    let mut hist: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (_, m) in &runs {
        for i in 0..n {
            agent_unique[i] += m.agent_unique_captures[i] / ns;
            active_steps[i] += m.active_steps[i];
            for (a, c) in m.action_counts[i].iter().enumerate() {
                counts[i][a] += c;
            }
        }
        for (&key, &c) in &m.capture_histogram {
            *hist.entry(key).or_default() += c;
        }
    }
    let report = EvalReport {
        scenario: cfg.scenario.clone(),
        algorithm: cfg.algorithm.to_string(),
        episodes: opts.episodes,
        seed: opts.seed,
        per_seed: runs
            .iter()
            .map(|(s, m)| SeedEval {
                train_seed: *s,
                mean_return: m.mean_return,
                std_return: m.std_return,
                returns: m.returns.clone(),
                mean_capture_reward: m.mean_capture_reward,
                mean_unique_captures: m.mean_unique_captures,
                total_failures: m.total_failures,
                agent_unique_captures: m.agent_unique_captures.clone(),
            })
            .collect(),
        mean_return: mean(|m| m.mean_return),
        mean_capture_reward: mean(|m| m.mean_capture_reward),
        mean_unique_captures: mean(|m| m.mean_unique_captures),
        total_failures: runs.iter().map(|(_, m)| m.total_failures).sum(),
        agent_unique_captures: agent_unique,
        active_steps,
    };

    write_json(&out_dir.join(EVAL_JSON), &report)?;
    write_action_frequencies(&out_dir.join(ACTION_FREQUENCIES), &counts, k)?;
    write_histogram(&out_dir.join(CAPTURE_HISTOGRAM), &hist, n)?;

    let manifest_out = EvalManifest {
        code_version: CODE_VERSION.to_owned(),
        started_at,
        finished_at: now_rfc3339(),
        run_dir: run_dir.display().to_string(),
        run_manifest_sha256: sha256_hex(&bytes),
        episodes: opts.episodes,
        seed: opts.seed,
        train_seeds: seeds,
        files: vec![EVAL_JSON.into(), ACTION_FREQUENCIES.into(), CAPTURE_HISTOGRAM.into()],
    };
    write_json(&out_dir.join(EVAL_MANIFEST), &manifest_out)?;
    Ok(EvalOutcome { out_dir, report, manifest: manifest_out })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::config(format!("{}: {e}", path.display()))
}

fn write_action_frequencies(path: &Path, counts: &[Vec<u64>], k: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for (agent, row) in counts.iter().enumerate() {
        for (a, &count) in row.iter().enumerate() {
            let action = ActionKind::from_index(a, k).map_or_else(|| a.to_string(), |x| x.label());
            w.serialize(ActionRow { agent, action, count }).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per agent for every target any agent scored, zeros included.
fn write_histogram(path: &Path, hist: &BTreeMap<(usize, usize), u64>, n: usize) -> Result<()> {
    let targets: BTreeSet<usize> = hist.keys().map(|&(_, t)| t).collect();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if targets.is_empty() {
        w.write_record(["agent", "target_id", "count"]).map_err(csv_err(path))?;
    }
    for agent in 0..n {
        for &target_id in &targets {
            let count = hist.get(&(agent, target_id)).copied().unwrap_or(0);
            w.serialize(HistogramRow { agent, target_id, count }).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
