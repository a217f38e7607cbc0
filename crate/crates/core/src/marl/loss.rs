use serde::{Deserialize, Serialize};

use super::{MarlError, TrainConfig};
use crate::nn::{Head, ParamId, ParamVector, Tape, Var};

/// Samples for one actor. Rows are row-major over `input_dim`; `picks` is
/// `rows x n_heads` with `None` for heads whose agent was inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorBatch {
    pub rows: usize,
    pub inputs: Vec<f64>,
    pub picks: Vec<Option<usize>>,
    pub old_log_probs: Vec<f64>,
    /// Advantages exactly as they enter the surrogate.
    pub advantages: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticBatch {
    pub rows: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossDiagnostics {
    pub total: f64,
    /// Clipped surrogate, the quantity being maximized.
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub mean_ratio: f64,
}

/// `min(r * a, clip(r, 1 - eps, 1 + eps) * a)`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    let a = ratio * adv;
    let b = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if a <= b {
        a
    } else {
        b
    }
}

pub(crate) struct ActorTerms {
    pub surrogate: Var,
    pub entropy: Var,
    pub weight: f64,
    pub clip_count: f64,
    pub kl_sum: f64,
    pub ratio_sum: f64,
}

pub(crate) fn actor_terms(
    tape: &mut Tape<'_>,
    pid: ParamId,
    params: &ParamVector,
    batch: &ActorBatch,
    eps: f64,
) -> Result<ActorTerms, MarlError> {
    let Head::Categorical { n_heads, n_actions } = params.spec().head else {
        return Err(MarlError::Contract("actor must have a categorical head".into()));
    };
    let rows = batch.rows;
    if batch.picks.len() != rows * n_heads
        || batch.old_log_probs.len() != rows
        || batch.advantages.len() != rows
        || batch.weights.len() != rows
    {
        return Err(MarlError::Contract("actor batch series lengths disagree".into()));
    }
    let x = tape.input(rows, params.spec().input_dim, batch.inputs.clone())?;
    let logits = tape.mlp(x, pid)?;
    let lp = tape.log_softmax(logits, n_actions)?;
    let chosen = tape.gather_sum(lp, n_actions, batch.picks.clone())?;
    let old = tape.input(rows, 1, batch.old_log_probs.clone())?;
    let diff = tape.sub(chosen, old)?;
    let ratio = tape.exp(diff);
    let adv = tape.input(rows, 1, batch.advantages.clone())?;
    let unclipped = tape.mul(ratio, adv)?;
    let clipped_ratio = tape.clip(ratio, 1.0 - eps, 1.0 + eps);
    let clipped = tape.mul(clipped_ratio, adv)?;
    let per_sample = tape.min(unclipped, clipped)?;
    let surrogate = tape.weighted_mean(per_sample, batch.weights.clone())?;
    let mask = batch.picks.iter().map(|p| p.is_some()).collect();
    let ent = tape.entropy(lp, n_actions, mask)?;
    let entropy = tape.weighted_mean(ent, batch.weights.clone())?;

    let (mut clip_count, mut kl_sum, mut ratio_sum) = (0.0, 0.0, 0.0);
    for (r, w) in tape.value(ratio).iter().zip(&batch.weights) {
        if *w > 0.0 {
            if (r - 1.0).abs() > eps {
                clip_count += w;
            }
            kl_sum += w * ((r - 1.0) - r.ln());
            ratio_sum += w * r;
        }
    }
    Ok(ActorTerms {
        surrogate,
        entropy,
        weight: batch.weights.iter().sum(),
        clip_count,
        kl_sum,
        ratio_sum,
    })
}

pub(crate) fn critic_term(
    tape: &mut Tape<'_>,
    pid: ParamId,
    params: &ParamVector,
    batch: &CriticBatch,
) -> Result<Var, MarlError> {
    if batch.targets.len() != batch.rows || batch.weights.len() != batch.rows {
        return Err(MarlError::Contract("critic batch series lengths disagree".into()));
    }
    let x = tape.input(batch.rows, params.spec().input_dim, batch.inputs.clone())?;
    let v = tape.mlp(x, pid)?;
    let target = tape.input(batch.rows, 1, batch.targets.clone())?;
    let err = tape.sub(v, target)?;
    let sq = tape.square(err);
    Ok(tape.weighted_mean(sq, batch.weights.clone())?)
}

/// Combined loss over several actors and critics:
/// `sum_a (-L_clip_a - c2 * H_a) + c1 * sum_c L_value_c`.
/// Returns per-network gradients, actors first, then critics.
pub(crate) fn joint_loss(
    actors: &[(&ParamVector, &ActorBatch)],
    critics: &[(&ParamVector, &CriticBatch)],
    cfg: &TrainConfig,
) -> Result<(LossDiagnostics, Vec<Vec<f64>>), MarlError> {
    let mut tape = Tape::new();
    let aids: Vec<ParamId> = actors.iter().map(|(p, _)| tape.register(p)).collect();
    let cids: Vec<ParamId> = critics.iter().map(|(p, _)| tape.register(p)).collect();

    let mut diag = LossDiagnostics::default();
    let mut terms: Vec<Var> = Vec::new();
    let (mut weight, mut clip, mut kl, mut ratio) = (0.0, 0.0, 0.0, 0.0);
    let mut n_actor = 0.0;
    for ((params, batch), pid) in actors.iter().zip(&aids) {
        let t = actor_terms(&mut tape, *pid, params, batch, cfg.clip_eps)?;
        diag.surrogate += tape.scalar(t.surrogate);
        diag.entropy += tape.scalar(t.entropy);
        n_actor += 1.0;
        weight += t.weight;
        clip += t.clip_count;
        kl += t.kl_sum;
        ratio += t.ratio_sum;
        let neg = tape.mul_const(t.surrogate, -1.0);
        let ent = tape.mul_const(t.entropy, -cfg.entropy_coef);
        terms.push(tape.add(neg, ent)?);
    }
    for ((params, batch), pid) in critics.iter().zip(&cids) {
        let lv = critic_term(&mut tape, *pid, params, batch)?;
        diag.value_loss += tape.scalar(lv);
        terms.push(tape.mul_const(lv, cfg.value_coef));
    }
    let mut total = *terms.first().ok_or_else(|| MarlError::Contract("empty loss".into()))?;
    for t in &terms[1..] {
        total = tape.add(total, *t)?;
    }
    diag.total = tape.scalar(total);
    if !diag.total.is_finite() {
        return Err(MarlError::Numeric("non-finite loss".into()));
    }
    if n_actor > 0.0 {
        diag.surrogate /= n_actor;
        diag.entropy /= n_actor;
    }
    if weight > 0.0 {
        diag.clip_fraction = clip / weight;
        diag.approx_kl = kl / weight;
        diag.mean_ratio = ratio / weight;
    }
    let grads = tape.backward(total)?;
    Ok((diag, grads))
}

/// PPO loss for one actor and one critic, with gradients `[actor, critic]`.
pub fn ppo_loss(
    actor_batch: &ActorBatch,
    critic_batch: &CriticBatch,
    actor: &ParamVector,
    critic: &ParamVector,
    cfg: &TrainConfig,
) -> Result<(f64, LossDiagnostics, Vec<Vec<f64>>), MarlError> {
    let (diag, grads) = joint_loss(&[(actor, actor_batch)], &[(critic, critic_batch)], cfg)?;
    Ok((diag.total, diag, grads))
}
