use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{JointPolicy, MarlError};
use crate::env::{CaptureOutcome, EnvConfig, EoEnv, Observation};
use crate::rng::{derive_seed, stream_rng};
use crate::satmodel::ActionKind;

const EVAL_EPISODE_STREAM: u64 = 11;
const EVAL_ACTION_STREAM: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub std_return: f64,
    pub capture_rewards: Vec<f64>,
    pub mean_capture_reward: f64,
    pub mean_unique_captures: f64,
    pub total_failures: usize,
    pub mean_failures: f64,
    /// `[agent][action]` counts over all episodes.
    pub action_counts: Vec<Vec<u64>>,
    pub active_steps: Vec<u64>,
    /// Mean unique captures per episode credited to each agent.
    pub agent_unique_captures: Vec<f64>,
    /// `(agent, target) -> unique captures` over all episodes.
    pub capture_histogram: BTreeMap<(usize, usize), u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub episode: usize,
    pub obs: Vec<Observation>,
    pub actions: Vec<Option<usize>>,
}

/// Greedy rollouts of `policy`. Fails if any episode's capture reward
/// exceeds the sum of all target priorities.
pub fn evaluate(
    policy: &dyn JointPolicy,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalMetrics, MarlError> {
    run(policy, env_cfg, n_episodes, seed, None)
}

/// As [`evaluate`], also returning every observation and chosen action.
pub fn evaluate_traced(
    policy: &dyn JointPolicy,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<(EvalMetrics, Vec<TraceStep>), MarlError> {
    let mut trace = Vec::new();
    let m = run(policy, env_cfg, n_episodes, seed, Some(&mut trace))?;
    Ok((m, trace))
}

fn run(
    policy: &dyn JointPolicy,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<EvalMetrics, MarlError> {
    let mut env = EoEnv::new(env_cfg.clone())?;
    let n = env.n_agents();
    if policy.n_agents() != n {
        return Err(MarlError::Contract(format!("policy for {} agents, env has {n}", policy.n_agents())));
    }
    let n_actions = env.action_space();
    let k = env_cfg.k_slots;
    let mut rng = stream_rng(seed, EVAL_ACTION_STREAM);
    let episode_base = derive_seed(seed, EVAL_EPISODE_STREAM);

    let mut returns = Vec::with_capacity(n_episodes);
    let mut capture_rewards = Vec::with_capacity(n_episodes);
    let mut unique = 0usize;
    let mut failures = 0usize;
    let mut action_counts = vec![vec![0u64; n_actions]; n];
    let mut active_steps = vec![0u64; n];
    let mut agent_unique = vec![0u64; n];
    let mut hist: BTreeMap<(usize, usize), u64> = BTreeMap::new();

    for e in 0..n_episodes {
        let mut obs = env.reset(derive_seed(episode_base, e as u64));
        let bound = env.total_priority();
        let (mut ret, mut cap) = (0.0, 0.0);
        while !env.is_done() {
            let active = env.active().to_vec();
            let actions = policy.act(&obs, &active, true, &mut rng)?;
            let joint: Vec<Option<ActionKind>> =
                actions.iter().map(|a| a.and_then(|i| ActionKind::from_index(i, k))).collect();
            for (i, a) in actions.iter().enumerate() {
                if let Some(a) = a {
                    action_counts[i][*a] += 1;
                    active_steps[i] += 1;
                }
            }
            let res = env.step(&joint)?;
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(TraceStep { episode: e, obs: obs.clone(), actions });
            }
            ret += res.team_reward;
            for (i, ev) in res.events.iter().enumerate() {
                if let CaptureOutcome::Scored { target, reward } = ev.capture {
                    cap += reward;
                    unique += 1;
                    agent_unique[i] += 1;
                    *hist.entry((i, target)).or_default() += 1;
                }
                if ev.failed {
                    failures += 1;
                }
            }
            obs = res.observations;
        }
        if cap > bound + 1e-9 {
            return Err(MarlError::UpperBound { got: cap, bound });
        }
        returns.push(ret);
        capture_rewards.push(cap);
    }

    let ne = n_episodes.max(1) as f64;
    let mean_return = returns.iter().sum::<f64>() / ne;
    let std_return = (returns.iter().map(|r| (r - mean_return).powi(2)).sum::<f64>() / ne).sqrt();
    Ok(EvalMetrics {
        episodes: n_episodes,
        mean_return,
        std_return,
        mean_capture_reward: capture_rewards.iter().sum::<f64>() / ne,
        returns,
        capture_rewards,
        mean_unique_captures: unique as f64 / ne,
        total_failures: failures,
        mean_failures: failures as f64 / ne,
        action_counts,
        active_steps,
        agent_unique_captures: agent_unique.iter().map(|&c| c as f64 / ne).collect(),
        capture_histogram: hist,
    })
}
