//! On-policy actor-critic training for the Earth-observation environment.
//!
//! All five algorithms share one rollout collector and one clipped-surrogate
//! loss. They differ in how actors and critics are laid out ([`AgentSet`]) and,
//! for HAPPO, in the sequential per-agent update with a compounding
//! importance factor.

mod agents;
mod eval;
mod gae;
mod loss;
mod rollout;
mod trainer;

pub use agents::{ActorInput, ActorSlot, AgentSet, CriticInput, CriticSlot, Decision, JointPolicy, RandomPolicy};
pub use eval::{evaluate, evaluate_traced, EvalMetrics, TraceStep};
pub use gae::{compute_gae, normalize_advantages};
pub use loss::{clipped_surrogate, ppo_loss, ActorBatch, CriticBatch, LossDiagnostics};
pub use rollout::{collect_rollouts, EpisodeSummary, RolloutBuffer};
pub use trainer::{
    train, train_centralised_ppo, train_happo, train_ippo, train_mappo, train_single_ppo, IterationMetrics,
    TrainOutput, Trainer,
};

use serde::{Deserialize, Serialize};

use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum MarlError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("capture reward {got} exceeds the total target priority {bound}")]
    UpperBound { got: f64, bound: f64 },
}

impl From<NnError> for MarlError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite(_) => MarlError::Numeric(e.to_string()),
            other => MarlError::Contract(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    CentralPpo,
    Ippo,
    Mappo,
    Happo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Self::Ppo, Self::CentralPpo, Self::Ippo, Self::Mappo, Self::Happo];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ppo => "ppo",
            Self::CentralPpo => "central_ppo",
            Self::Ippo => "ippo",
            Self::Mappo => "mappo",
            Self::Happo => "happo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn is_multi_agent(self) -> bool {
        self != Self::Ppo
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub update_epochs: usize,
    pub minibatches: usize,
    /// Environment steps per iteration; `None` means one full episode.
    pub rollout_steps: Option<usize>,
    pub total_env_steps: usize,
    pub eval_episodes: usize,
    pub hidden: Vec<usize>,
    /// Multiply each agent's advantage by the running product of earlier
    /// agents' ratios in HAPPO.
    pub happo_compounding: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 3e-4,
            update_epochs: 4,
            minibatches: 4,
            rollout_steps: None,
            total_env_steps: 20_000,
            eval_episodes: 10,
            hidden: crate::nn::DEFAULT_HIDDEN.to_vec(),
            happo_compounding: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(MarlError::Config("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.clip_eps > 0.0) || !self.clip_eps.is_finite() {
            return Err(MarlError::Config("clip_eps must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(MarlError::Config("lr must be positive".into()));
        }
        if !self.value_coef.is_finite() || !self.entropy_coef.is_finite() {
            return Err(MarlError::Config("loss coefficients must be finite".into()));
        }
        if self.minibatches == 0 || self.total_env_steps == 0 || self.rollout_steps == Some(0) {
            return Err(MarlError::Config("minibatches, total_env_steps and rollout_steps must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(MarlError::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
