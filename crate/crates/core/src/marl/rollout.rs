use super::{compute_gae, AgentSet, MarlError};
use crate::env::{CaptureOutcome, EoEnv, Observation};
use crate::rng::SimRng;
use crate::satmodel::ActionKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpisodeSummary {
    pub team_return: f64,
    pub capture_reward: f64,
    pub unique_captures: usize,
    pub failures: usize,
    pub steps: usize,
}

/// One collection window. Indexed `[step][agent]`, `[step][actor]` or
/// `[step][critic]` as named.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<Observation>>,
    pub states: Vec<Vec<f64>>,
    pub active: Vec<Vec<bool>>,
    pub actions: Vec<Vec<Option<usize>>>,
    pub log_probs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<Vec<f64>>,
    /// Critic estimate of the state after the last step, 0 if it was terminal.
    pub bootstrap: Vec<f64>,
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
    pub entropy_sum: f64,
    pub entropy_count: usize,
    pub episodes: Vec<EpisodeSummary>,
    /// The episode still running when collection stopped, if any.
    pub partial: Option<EpisodeSummary>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn n_critics(&self) -> usize {
        self.bootstrap.len()
    }

    /// Fill `advantages` and `returns` for every critic.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), MarlError> {
        let n = self.len();
        let k = self.n_critics();
        self.advantages = vec![vec![0.0; k]; n];
        self.returns = vec![vec![0.0; k]; n];
        for c in 0..k {
            let mut v: Vec<f64> = self.values.iter().map(|row| row[c]).collect();
            v.push(self.bootstrap[c]);
            let (adv, ret) = compute_gae(&self.rewards, &v, &self.dones, gamma, lambda)?;
            for t in 0..n {
                self.advantages[t][c] = adv[t];
                self.returns[t][c] = ret[t];
            }
        }
        Ok(())
    }

    pub fn advantage_series(&self, critic: usize) -> Vec<f64> {
        self.advantages.iter().map(|row| row[critic]).collect()
    }
}

/// Run `n_steps` environment steps from the current (already reset) state.
/// Finished episodes are reset with seeds from `next_episode_seed`, except
/// when the window ends on a terminal step.
pub fn collect_rollouts(
    env: &mut EoEnv,
    agents: &AgentSet,
    n_steps: usize,
    rng: &mut SimRng,
    next_episode_seed: &mut dyn FnMut() -> u64,
) -> Result<RolloutBuffer, MarlError> {
    let n = env.n_agents();
    if agents.n_agents != n {
        return Err(MarlError::Contract(format!("{} agents for {n} satellites", agents.n_agents)));
    }
    let k = env.config().k_slots;
    let mut buf = RolloutBuffer::default();
    let mut obs: Vec<Observation> = (0..n).map(|i| env.build_observation(i)).collect();
    let mut ep = EpisodeSummary::default();

    for step in 0..n_steps {
        let state = env.global_state();
        let active = env.active().to_vec();
        let decision = agents.decide(&obs, &active, false, rng)?;
        let values = agents.values(&obs, &state)?;
        let joint: Vec<Option<ActionKind>> = decision
            .actions
            .iter()
            .map(|a| a.and_then(|i| ActionKind::from_index(i, k)))
            .collect();
        let res = env.step(&joint)?;

        ep.team_return += res.team_reward;
        ep.steps += 1;
        for e in &res.events {
            if let CaptureOutcome::Scored { reward, .. } = e.capture {
                ep.capture_reward += reward;
                ep.unique_captures += 1;
            }
            if e.failed {
                ep.failures += 1;
            }
        }

        buf.obs.push(std::mem::take(&mut obs));
        buf.states.push(state);
        buf.active.push(active);
        buf.actions.push(decision.actions);
        buf.log_probs.push(decision.log_probs);
        buf.rewards.push(res.team_reward);
        buf.dones.push(res.done);
        buf.values.push(values);
        buf.entropy_sum += decision.entropy_sum;
        buf.entropy_count += decision.entropy_count;

        if res.done {
            buf.episodes.push(std::mem::take(&mut ep));
            if step + 1 == n_steps {
                break;
            }
            obs = env.reset(next_episode_seed());
        } else {
            obs = res.observations;
        }
    }
    if ep.steps > 0 {
        buf.partial = Some(ep);
    }
    buf.bootstrap = if buf.dones.last().copied().unwrap_or(true) {
        vec![0.0; agents.critics.len()]
    } else {
        agents.values(&obs, &env.global_state())?
    };
    Ok(buf)
}
