use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::joint_loss;
use super::{
    collect_rollouts, normalize_advantages, ActorBatch, AgentSet, Algorithm, CriticBatch, LossDiagnostics,
    MarlError, RolloutBuffer, TrainConfig,
};
use crate::env::{EnvConfig, EoEnv};
use crate::nn::{forward_batch, Head};
use crate::rng::{derive_seed, stream_rng, SimRng};

const SAMPLE_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const PERMUTATION_STREAM: u64 = 3;
const EPISODE_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Cumulative environment steps after this iteration's rollout.
    pub env_steps: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub unique_captures: f64,
    pub failures: f64,
    pub capture_reward: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub surrogate: f64,
    pub value_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agents: AgentSet,
    pub metrics: Vec<IterationMetrics>,
}

pub struct Trainer {
    cfg: TrainConfig,
    env: EoEnv,
    agents: AgentSet,
    sample_rng: SimRng,
    shuffle_rng: SimRng,
    permutation_rng: SimRng,
    episode_base: u64,
    episode_counter: u64,
    rollout_steps: usize,
    n_iterations: usize,
    env_steps: usize,
    metrics: Vec<IterationMetrics>,
    /// HAPPO agent order of the latest iteration.
    pub last_permutation: Vec<usize>,
    /// HAPPO compounding factors seen by each agent of the latest iteration,
    /// in update order.
    pub last_happo_factors: Vec<Vec<f64>>,
}

impl Trainer {
    pub fn new(algorithm: Algorithm, env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<Self, MarlError> {
        cfg.validate()?;
        let env = EoEnv::new(env_cfg)?;
        let agents = AgentSet::new(
            algorithm,
            env.n_agents(),
            env.obs_dim(),
            env.state_dim(),
            env.action_space(),
            &cfg,
            seed,
        )?;
        let rollout_steps = cfg.rollout_steps.unwrap_or_else(|| env.horizon_steps()).max(1);
        let n_iterations = cfg.total_env_steps.div_ceil(rollout_steps);
        Ok(Self {
            sample_rng: stream_rng(seed, SAMPLE_STREAM),
            shuffle_rng: stream_rng(seed, SHUFFLE_STREAM),
            permutation_rng: stream_rng(seed, PERMUTATION_STREAM),
            episode_base: derive_seed(seed, EPISODE_STREAM),
            episode_counter: 0,
            rollout_steps,
            n_iterations,
            env_steps: 0,
            metrics: Vec::new(),
            last_permutation: Vec::new(),
            last_happo_factors: Vec::new(),
            cfg,
            env,
            agents,
        })
    }

    pub fn agents(&self) -> &AgentSet {
        &self.agents
    }

    pub fn into_agents(self) -> AgentSet {
        self.agents
    }

    pub fn metrics(&self) -> &[IterationMetrics] {
        &self.metrics
    }

    pub fn n_iterations(&self) -> usize {
        self.n_iterations
    }

    pub fn rollout_steps(&self) -> usize {
        self.rollout_steps
    }

    pub fn is_finished(&self) -> bool {
        self.metrics.len() >= self.n_iterations
    }

    fn next_episode_seed(base: u64, counter: &mut u64) -> u64 {
        let s = derive_seed(base, *counter);
        *counter += 1;
        s
    }

    /// Reset, collect one window and compute advantages.
    pub fn collect(&mut self) -> Result<RolloutBuffer, MarlError> {
        let base = self.episode_base;
        let counter = &mut self.episode_counter;
        self.env.reset(Self::next_episode_seed(base, counter));
        let mut seeds = || Self::next_episode_seed(base, counter);
        let mut buf = collect_rollouts(&mut self.env, &self.agents, self.rollout_steps, &mut self.sample_rng, &mut seeds)?;
        buf.compute_advantages(self.cfg.gamma, self.cfg.gae_lambda)?;
        Ok(buf)
    }

    /// One collect-and-update cycle.
    pub fn run_iteration(&mut self) -> Result<IterationMetrics, MarlError> {
        let buf = self.collect()?;
        self.env_steps += buf.len();
        let diag = self.update(&buf)?;
        for net in self.agents.actors.iter().map(|a| &a.params).chain(self.agents.critics.iter().map(|c| &c.params)) {
            if !net.is_finite() {
                return Err(MarlError::Numeric("non-finite parameters after update".into()));
            }
        }

        let eps: Vec<_> = if buf.episodes.is_empty() {
            buf.partial.iter().copied().collect()
        } else {
            buf.episodes.clone()
        };
        let n = eps.len().max(1) as f64;
        let m = IterationMetrics {
            iteration: self.metrics.len(),
            env_steps: self.env_steps,
            episodes: buf.episodes.len(),
            mean_return: eps.iter().map(|e| e.team_return).sum::<f64>() / n,
            unique_captures: eps.iter().map(|e| e.unique_captures as f64).sum::<f64>() / n,
            failures: eps.iter().map(|e| e.failures as f64).sum::<f64>() / n,
            capture_reward: eps.iter().map(|e| e.capture_reward).sum::<f64>() / n,
            entropy: if buf.entropy_count > 0 { buf.entropy_sum / buf.entropy_count as f64 } else { 0.0 },
            clip_fraction: diag.clip_fraction,
            approx_kl: diag.approx_kl,
            surrogate: diag.surrogate,
            value_loss: diag.value_loss,
        };
        self.metrics.push(m);
        Ok(m)
    }

    /// Run the remaining iterations. On error, metrics up to the failing
    /// iteration stay available through [`Trainer::metrics`].
    pub fn run(&mut self) -> Result<(), MarlError> {
        while !self.is_finished() {
            self.run_iteration()?;
        }
        Ok(())
    }

    /// Apply the algorithm's update to a collected buffer.
    pub fn update(&mut self, buf: &RolloutBuffer) -> Result<LossDiagnostics, MarlError> {
        if self.agents.algorithm == Algorithm::Happo {
            return self.happo_update(buf);
        }
        let actors: Vec<usize> = (0..self.agents.actors.len()).collect();
        let critics: Vec<usize> = (0..self.agents.critics.len()).collect();
        self.epochs(buf, &actors, &critics, None)
    }

    fn happo_update(&mut self, buf: &RolloutBuffer) -> Result<LossDiagnostics, MarlError> {
        let mut order: Vec<usize> = (0..self.agents.actors.len()).collect();
        order.shuffle(&mut self.permutation_rng);
        let mut factor = vec![1.0; buf.len()];
        let mut factors = Vec::with_capacity(order.len());
        let mut acc = DiagAccumulator::default();
        for &a in &order {
            factors.push(factor.clone());
            let critic = self.agents.actors[a].critic;
            let d = self.epochs(buf, &[a], &[critic], Some(&factor))?;
            acc.add(&d);
            if self.cfg.happo_compounding {
                let new_lp = self.recompute_log_probs(buf, a)?;
                for t in 0..buf.len() {
                    if self.actor_weight(buf, a, t) > 0.0 {
                        factor[t] *= (new_lp[t] - buf.log_probs[t][a]).exp();
                    }
                }
            }
        }
        self.last_permutation = order;
        self.last_happo_factors = factors;
        Ok(acc.mean())
    }

    /// Joint log-probability of the stored actions under the current actor.
    pub fn recompute_log_probs(&self, buf: &RolloutBuffer, actor: usize) -> Result<Vec<f64>, MarlError> {
        let slot = &self.agents.actors[actor];
        let Head::Categorical { n_heads, n_actions } = slot.params.spec().head else {
            return Err(MarlError::Contract("actor must have a categorical head".into()));
        };
        let rows = buf.len();
        let inputs: Vec<f64> = (0..rows).flat_map(|t| self.agents.actor_input(actor, &buf.obs[t])).collect();
        let logits = forward_batch(&slot.params, &inputs, rows)?;
        let mut lp = vec![0.0; logits.len()];
        crate::nn::log_softmax_groups(&logits, n_actions, &mut lp);
        Ok((0..rows)
            .map(|t| {
                let mut s = 0.0;
                for (h, &agent) in slot.agents.iter().enumerate() {
                    if let (true, Some(a)) = (buf.active[t][agent], buf.actions[t][agent]) {
                        s += lp[(t * n_heads + h) * n_actions + a];
                    }
                }
                s
            })
            .collect())
    }

    fn actor_weight(&self, buf: &RolloutBuffer, actor: usize, t: usize) -> f64 {
        let any = self.agents.actors[actor].agents.iter().any(|&i| buf.active[t][i]);
        if any {
            1.0
        } else {
            0.0
        }
    }

    fn actor_batch(&self, buf: &RolloutBuffer, actor: usize, idx: &[usize], factor: Option<&[f64]>) -> ActorBatch {
        let slot = &self.agents.actors[actor];
        let mut inputs = Vec::new();
        let mut picks = Vec::with_capacity(idx.len() * slot.agents.len());
        let mut old = Vec::with_capacity(idx.len());
        let mut raw = Vec::with_capacity(idx.len());
        let mut weights = Vec::with_capacity(idx.len());
        for &t in idx {
            inputs.extend(self.agents.actor_input(actor, &buf.obs[t]));
            for &agent in &slot.agents {
                picks.push(if buf.active[t][agent] { buf.actions[t][agent] } else { None });
            }
            old.push(buf.log_probs[t][actor]);
            raw.push(buf.advantages[t][slot.critic]);
            weights.push(self.actor_weight(buf, actor, t));
        }
        let mut advantages = normalize_advantages(&raw, &weights);
        if let Some(m) = factor {
            for (a, &t) in advantages.iter_mut().zip(idx) {
                *a *= m[t];
            }
        }
        ActorBatch { rows: idx.len(), inputs, picks, old_log_probs: old, advantages, weights }
    }

    fn critic_batch(&self, buf: &RolloutBuffer, critic: usize, idx: &[usize]) -> CriticBatch {
        let mut inputs = Vec::new();
        for &t in idx {
            inputs.extend(self.agents.critic_input(critic, &buf.obs[t], &buf.states[t]));
        }
        CriticBatch {
            rows: idx.len(),
            inputs,
            targets: idx.iter().map(|&t| buf.returns[t][critic]).collect(),
            weights: vec![1.0; idx.len()],
        }
    }

    fn epochs(
        &mut self,
        buf: &RolloutBuffer,
        actors: &[usize],
        critics: &[usize],
        factor: Option<&[f64]>,
    ) -> Result<LossDiagnostics, MarlError> {
        let n = buf.len();
        let mut acc = DiagAccumulator::default();
        if n == 0 {
            return Ok(acc.mean());
        }
        let chunk = n.div_ceil(self.cfg.minibatches.min(n));
        for _ in 0..self.cfg.update_epochs {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut self.shuffle_rng);
            for mb in idx.chunks(chunk) {
                let abatches: Vec<ActorBatch> = actors.iter().map(|&a| self.actor_batch(buf, a, mb, factor)).collect();
                let cbatches: Vec<CriticBatch> = critics.iter().map(|&c| self.critic_batch(buf, c, mb)).collect();
                let (diag, grads) = {
                    let ap: Vec<_> = actors.iter().zip(&abatches).map(|(&a, b)| (&self.agents.actors[a].params, b)).collect();
                    let cp: Vec<_> = critics.iter().zip(&cbatches).map(|(&c, b)| (&self.agents.critics[c].params, b)).collect();
                    joint_loss(&ap, &cp, &self.cfg)?
                };
                let mut g = grads.into_iter();
                for &a in actors {
                    let slot = &mut self.agents.actors[a];
                    slot.opt.step(&mut slot.params.values, &g.next().expect("one gradient per actor"))?;
                }
                for &c in critics {
                    let slot = &mut self.agents.critics[c];
                    slot.opt.step(&mut slot.params.values, &g.next().expect("one gradient per critic"))?;
                }
                acc.add(&diag);
            }
        }
        Ok(acc.mean())
    }
}

#[derive(Default)]
struct DiagAccumulator {
    sum: LossDiagnostics,
    n: usize,
}

impl DiagAccumulator {
    fn add(&mut self, d: &LossDiagnostics) {
        self.sum.total += d.total;
        self.sum.surrogate += d.surrogate;
        self.sum.value_loss += d.value_loss;
        self.sum.entropy += d.entropy;
        self.sum.clip_fraction += d.clip_fraction;
        self.sum.approx_kl += d.approx_kl;
        self.sum.mean_ratio += d.mean_ratio;
        self.n += 1;
    }

    fn mean(&self) -> LossDiagnostics {
        if self.n == 0 {
            return LossDiagnostics::default();
        }
        let k = self.n as f64;
        LossDiagnostics {
            total: self.sum.total / k,
            surrogate: self.sum.surrogate / k,
            value_loss: self.sum.value_loss / k,
            entropy: self.sum.entropy / k,
            clip_fraction: self.sum.clip_fraction / k,
            approx_kl: self.sum.approx_kl / k,
            mean_ratio: self.sum.mean_ratio / k,
        }
    }
}

/// Train `algorithm` to completion for one seed.
pub fn train(algorithm: Algorithm, env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<TrainOutput, MarlError> {
    let mut t = Trainer::new(algorithm, env_cfg, cfg, seed)?;
    t.run()?;
    let metrics = t.metrics.clone();
    Ok(TrainOutput { agents: t.into_agents(), metrics })
}

pub fn train_single_ppo(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<TrainOutput, MarlError> {
    if env_cfg.n_sats() != 1 {
        return Err(MarlError::Config(format!("ppo needs exactly one satellite, got {}", env_cfg.n_sats())));
    }
    train(Algorithm::Ppo, env_cfg, cfg, seed)
}

pub fn train_centralised_ppo(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<TrainOutput, MarlError> {
    train(Algorithm::CentralPpo, env_cfg, cfg, seed)
}

pub fn train_ippo(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<TrainOutput, MarlError> {
    train(Algorithm::Ippo, env_cfg, cfg, seed)
}

pub fn train_mappo(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<TrainOutput, MarlError> {
    train(Algorithm::Mappo, env_cfg, cfg, seed)
}

pub fn train_happo(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<TrainOutput, MarlError> {
    train(Algorithm::Happo, env_cfg, cfg, seed)
}
