use rand::Rng;

use super::{Algorithm, MarlError, TrainConfig};
use crate::env::Observation;
use crate::nn::{argmax, init_params, policy_forward, sample_categorical, value_forward, AdamState, Head, MlpSpec, ParamVector};
use crate::rng::{derive_seed, SimRng};

const ACTOR_INIT_STREAM: u64 = 0x100;
const CRITIC_INIT_STREAM: u64 = 0x200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorInput {
    Local(usize),
    /// Every agent's observation, concatenated in agent order.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticInput {
    Local(usize),
    State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorSlot {
    pub params: ParamVector,
    pub opt: AdamState,
    pub input: ActorInput,
    /// Agent controlled by each output head.
    pub agents: Vec<usize>,
    pub critic: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticSlot {
    pub params: ParamVector,
    pub opt: AdamState,
    pub input: CriticInput,
}

/// Actors, critics and optimizer states for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSet {
    pub algorithm: Algorithm,
    pub n_agents: usize,
    pub n_actions: usize,
    pub actors: Vec<ActorSlot>,
    pub critics: Vec<CriticSlot>,
}

struct Layout {
    actors: Vec<(ActorInput, Vec<usize>, usize)>,
    critics: Vec<CriticInput>,
}

fn layout(algorithm: Algorithm, n: usize) -> Layout {
    let per_agent = |critic: &dyn Fn(usize) -> usize| (0..n).map(|i| (ActorInput::Local(i), vec![i], critic(i))).collect();
    match algorithm {
        Algorithm::Ppo | Algorithm::Ippo => Layout {
            actors: per_agent(&|i| i),
            critics: (0..n).map(CriticInput::Local).collect(),
        },
        Algorithm::Mappo => Layout {
            actors: per_agent(&|_| 0),
            critics: vec![CriticInput::State],
        },
        Algorithm::Happo => Layout {
            actors: per_agent(&|i| i),
            critics: vec![CriticInput::State; n],
        },
        Algorithm::CentralPpo => Layout {
            actors: vec![(ActorInput::Joint, (0..n).collect(), 0)],
            critics: vec![CriticInput::State],
        },
    }
}

/// Output of one policy query.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub actions: Vec<Option<usize>>,
    /// Joint log-probability per actor over its active heads.
    pub log_probs: Vec<f64>,
    pub entropy_sum: f64,
    pub entropy_count: usize,
}

impl AgentSet {
    pub fn new(
        algorithm: Algorithm,
        n_agents: usize,
        obs_dim: usize,
        state_dim: usize,
        n_actions: usize,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Self, MarlError> {
        if n_agents == 0 {
            return Err(MarlError::Config("need at least one agent".into()));
        }
        let lay = layout(algorithm, n_agents);
        let mut actors = Vec::new();
        for (a, (input, agents, critic)) in lay.actors.into_iter().enumerate() {
            let dim = match input {
                ActorInput::Local(_) => obs_dim,
                ActorInput::Joint => obs_dim * n_agents,
            };
            let spec = MlpSpec::joint_policy(dim, agents.len(), n_actions).with_hidden(cfg.hidden.clone());
            let params = init_params(&spec, derive_seed(seed, ACTOR_INIT_STREAM + a as u64))?;
            let opt = AdamState::new(params.len(), cfg.lr);
            actors.push(ActorSlot { params, opt, input, agents, critic });
        }
        let mut critics = Vec::new();
        for (c, input) in lay.critics.into_iter().enumerate() {
            let dim = match input {
                CriticInput::Local(_) => obs_dim,
                CriticInput::State => state_dim,
            };
            let spec = MlpSpec::value(dim).with_hidden(cfg.hidden.clone());
            let params = init_params(&spec, derive_seed(seed, CRITIC_INIT_STREAM + c as u64))?;
            let opt = AdamState::new(params.len(), cfg.lr);
            critics.push(CriticSlot { params, opt, input });
        }
        Ok(Self { algorithm, n_agents, n_actions, actors, critics })
    }

    /// Rebuild from stored networks. Shapes must match the algorithm layout.
    pub fn from_params(
        algorithm: Algorithm,
        n_agents: usize,
        obs_dim: usize,
        state_dim: usize,
        actors: Vec<ParamVector>,
        critics: Vec<ParamVector>,
        lr: f64,
    ) -> Result<Self, MarlError> {
        let lay = layout(algorithm, n_agents);
        if actors.len() != lay.actors.len() || critics.len() != lay.critics.len() {
            return Err(MarlError::Contract(format!(
                "{algorithm} with {n_agents} agents needs {} actors and {} critics, got {} and {}",
                lay.actors.len(),
                lay.critics.len(),
                actors.len(),
                critics.len()
            )));
        }
        let mut n_actions = None;
        let mut out_actors = Vec::new();
        for ((input, agents, critic), params) in lay.actors.into_iter().zip(actors) {
            let dim = match input {
                ActorInput::Local(_) => obs_dim,
                ActorInput::Joint => obs_dim * n_agents,
            };
            let Head::Categorical { n_heads, n_actions: na } = params.spec().head else {
                return Err(MarlError::Contract("actor network has a scalar head".into()));
            };
            if params.spec().input_dim != dim || n_heads != agents.len() || n_actions.is_some_and(|x| x != na) {
                return Err(MarlError::Contract("actor network shape does not fit the environment".into()));
            }
            n_actions = Some(na);
            let opt = AdamState::new(params.len(), lr);
            out_actors.push(ActorSlot { params, opt, input, agents, critic });
        }
        let mut out_critics = Vec::new();
        for (input, params) in lay.critics.into_iter().zip(critics) {
            let dim = match input {
                CriticInput::Local(_) => obs_dim,
                CriticInput::State => state_dim,
            };
            if params.spec().head != Head::Scalar || params.spec().input_dim != dim {
                return Err(MarlError::Contract("critic network shape does not fit the environment".into()));
            }
            let opt = AdamState::new(params.len(), lr);
            out_critics.push(CriticSlot { params, opt, input });
        }
        Ok(Self {
            algorithm,
            n_agents,
            n_actions: n_actions.unwrap_or(0),
            actors: out_actors,
            critics: out_critics,
        })
    }

    pub fn actor_input(&self, actor: usize, obs: &[Observation]) -> Vec<f64> {
        match self.actors[actor].input {
            ActorInput::Local(i) => obs[i].0.clone(),
            ActorInput::Joint => obs.iter().flat_map(|o| o.0.iter().copied()).collect(),
        }
    }

    pub fn critic_input(&self, critic: usize, obs: &[Observation], state: &[f64]) -> Vec<f64> {
        match self.critics[critic].input {
            CriticInput::Local(i) => obs[i].0.clone(),
            CriticInput::State => state.to_vec(),
        }
    }

    /// Sample (or, with `greedy`, take the mode of) every active agent's
    /// action. One uniform draw per active agent, in actor then head order.
    pub fn decide(
        &self,
        obs: &[Observation],
        active: &[bool],
        greedy: bool,
        rng: &mut SimRng,
    ) -> Result<Decision, MarlError> {
        let mut actions = vec![None; self.n_agents];
        let mut log_probs = Vec::with_capacity(self.actors.len());
        let (mut entropy_sum, mut entropy_count) = (0.0, 0);
        for (a, slot) in self.actors.iter().enumerate() {
            let out = policy_forward(&slot.params, &self.actor_input(a, obs))?;
            let mut lp = 0.0;
            for (h, &agent) in slot.agents.iter().enumerate() {
                if !active[agent] {
                    continue;
                }
                let choice = if greedy {
                    argmax(out.probs(h))
                } else {
                    sample_categorical(out.probs(h), rng.random::<f64>())
                };
                lp += out.log_probs(h)[choice];
                entropy_sum += out.entropy[h];
                entropy_count += 1;
                actions[agent] = Some(choice);
            }
            log_probs.push(lp);
        }
        Ok(Decision { actions, log_probs, entropy_sum, entropy_count })
    }

    pub fn values(&self, obs: &[Observation], state: &[f64]) -> Result<Vec<f64>, MarlError> {
        (0..self.critics.len())
            .map(|c| Ok(value_forward(&self.critics[c].params, &self.critic_input(c, obs, state))?))
            .collect()
    }
}

/// Anything that maps observations to a joint action.
pub trait JointPolicy {
    fn n_agents(&self) -> usize;

    fn act(
        &self,
        obs: &[Observation],
        active: &[bool],
        greedy: bool,
        rng: &mut SimRng,
    ) -> Result<Vec<Option<usize>>, MarlError>;
}

impl JointPolicy for AgentSet {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn act(
        &self,
        obs: &[Observation],
        active: &[bool],
        greedy: bool,
        rng: &mut SimRng,
    ) -> Result<Vec<Option<usize>>, MarlError> {
        Ok(self.decide(obs, active, greedy, rng)?.actions)
    }
}

/// Uniform over all actions for every active agent, greedy or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomPolicy {
    pub n_agents: usize,
    pub n_actions: usize,
}

impl JointPolicy for RandomPolicy {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn act(
        &self,
        _obs: &[Observation],
        active: &[bool],
        _greedy: bool,
        rng: &mut SimRng,
    ) -> Result<Vec<Option<usize>>, MarlError> {
        Ok(active
            .iter()
            .map(|&a| if a { Some(rng.random_range(0..self.n_actions)) } else { None })
            .collect())
    }
}
