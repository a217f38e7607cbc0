use super::loss::joint_loss;
use super::*;
use crate::env::{EnvConfig, EoEnv, FixedTarget, Observation};
use crate::nn::{init_params, policy_forward, MlpSpec};
use crate::rng::{stream_rng, SimRng};
use crate::{ConstellationSpec, GroundPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn small_env(n_sats: usize) -> EnvConfig {
    EnvConfig {
        constellation: ConstellationSpec::cluster(n_sats),
        n_targets: 60,
        horizon_orbits: 0.2,
        ..Default::default()
    }
}

fn small_train() -> TrainConfig {
    TrainConfig { total_env_steps: 120, update_epochs: 2, minibatches: 2, ..Default::default() }
}

/// Direct double sum of discounted TD residuals, stopping at episode ends.
fn brute_force_gae(r: &[f64], v: &[f64], d: &[bool], g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| r[t] + if d[t] { 0.0 } else { g * v[t + 1] } - v[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut s = 0.0;
            let mut coef = 1.0;
            for k in t..n {
                s += coef * delta[k];
                if d[k] {
                    break;
                }
                coef *= g * l;
            }
            s
        })
        .collect()
}

#[test]
fn gae_examples() {
    let (adv, ret) = compute_gae(&[1.0, 1.0], &[0.0; 3], &[false, false], 1.0, 1.0).unwrap();
    assert_eq!(adv, vec![2.0, 1.0]);
    assert_eq!(ret, vec![2.0, 1.0]);

    let r = [0.5, -1.0, 2.0];
    let v = [0.1, 0.2, -0.3, 0.4];
    let d = [false, true, false];
    let (adv, _) = compute_gae(&r, &v, &d, 0.9, 0.0).unwrap();
    assert_eq!(adv[0], 0.5 + 0.9 * 0.2 - 0.1);
    assert_eq!(adv[1], -1.0 - 0.2);
    assert_eq!(adv[2], 2.0 + 0.9 * 0.4 + 0.3);

    assert!(compute_gae(&r, &v[..3], &d, 0.9, 0.9).is_err());
    assert!(compute_gae(&r, &v, &d[..2], 0.9, 0.9).is_err());
}

#[test]
fn gae_matches_brute_force() {
    let mut rng = SimRng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.random_range(1..=16);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.2).collect();
        let (g, l) = (rng.random::<f64>(), rng.random::<f64>());
        let (adv, ret) = compute_gae(&r, &v, &d, g, l).unwrap();
        for (t, (a, b)) in adv.iter().zip(brute_force_gae(&r, &v, &d, g, l)).enumerate() {
            assert!((a - b).abs() < 1e-10);
            assert!((ret[t] - (a + v[t])).abs() < 1e-12);
        }
    }
}

#[test]
fn advantage_normalization() {
    let a = normalize_advantages(&[1.0, 2.0, 3.0, 100.0], &[1.0, 1.0, 1.0, 0.0]);
    assert_eq!(a[3], 0.0);
    let mean: f64 = a[..3].iter().sum::<f64>() / 3.0;
    let var: f64 = a[..3].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    assert_eq!(normalize_advantages(&[4.0, 4.0], &[1.0, 1.0]), vec![0.0, 0.0]);
    assert_eq!(normalize_advantages(&[4.0], &[0.0]), vec![0.0]);
}

proptest! {
    #[test]
    fn surrogate_is_the_pessimistic_bound(r in 0.0f64..4.0, a in -10.0f64..10.0, eps in 0.01f64..0.5) {
        let s = clipped_surrogate(r, a, eps);
        prop_assert!(s <= r * a);
        prop_assert!(s <= r.clamp(1.0 - eps, 1.0 + eps) * a);
        prop_assert!(s == r * a || s == r.clamp(1.0 - eps, 1.0 + eps) * a);
    }
}

fn toy_batches(actor: &crate::nn::ParamVector, critic: &crate::nn::ParamVector, shift: f64) -> (ActorBatch, CriticBatch) {
    let rows = 5;
    let d = actor.spec().input_dim;
    let mut rng = SimRng::seed_from_u64(3);
    let inputs: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let picks: Vec<Option<usize>> = (0..rows).map(|r| Some(r % 4)).collect();
    let old: Vec<f64> = (0..rows)
        .map(|r| policy_forward(actor, &inputs[r * d..(r + 1) * d]).unwrap().log_probs[r % 4] - shift)
        .collect();
    let advantages = vec![1.0, -0.5, 2.0, 0.3, -1.2];
    let targets: Vec<f64> = (0..rows)
        .map(|r| crate::nn::value_forward(critic, &inputs[r * d..(r + 1) * d]).unwrap())
        .collect();
    (
        ActorBatch { rows, inputs: inputs.clone(), picks, old_log_probs: old, advantages, weights: vec![1.0; rows] },
        CriticBatch { rows, inputs, targets, weights: vec![1.0; rows] },
    )
}

#[test]
fn ppo_loss_first_epoch_identity() {
    let actor = init_params(&MlpSpec::policy(7, 4), 1).unwrap();
    let critic = init_params(&MlpSpec::value(7), 2).unwrap();
    let (ab, cb) = toy_batches(&actor, &critic, 0.0);
    let cfg = TrainConfig::default();
    let (total, diag, grads) = ppo_loss(&ab, &cb, &actor, &critic, &cfg).unwrap();
    assert_eq!(diag.mean_ratio, 1.0);
    assert_eq!(diag.clip_fraction, 0.0);
    assert!(diag.approx_kl.abs() < 1e-15);
    let mean_adv = ab.advantages.iter().sum::<f64>() / 5.0;
    assert!((diag.surrogate - mean_adv).abs() < 1e-12);
    assert_eq!(diag.value_loss, 0.0);
    assert!((total - (-diag.surrogate - cfg.entropy_coef * diag.entropy)).abs() < 1e-12);
    assert!(grads[1].iter().all(|g| *g == 0.0));
}

#[test]
fn ppo_loss_clips_large_ratios() {
    let actor = init_params(&MlpSpec::policy(7, 4), 1).unwrap();
    let critic = init_params(&MlpSpec::value(7), 2).unwrap();
    // every ratio is 1 + 2 * eps
    let (mut ab, cb) = toy_batches(&actor, &critic, 1.4f64.ln());
    ab.advantages = vec![1.0, 2.0, 0.5, 3.0, 1.5];
    let cfg = TrainConfig::default();
    let (_, diag, grads) = ppo_loss(&ab, &cb, &actor, &critic, &cfg).unwrap();
    let want = ab.advantages.iter().map(|a| 1.2 * a).sum::<f64>() / 5.0;
    assert!((diag.surrogate - want).abs() < 1e-12);
    assert_eq!(diag.clip_fraction, 1.0);
    // with zero entropy weight the clipped branch carries no gradient
    let cfg0 = TrainConfig { entropy_coef: 0.0, ..cfg };
    let (_, _, g0) = ppo_loss(&ab, &cb, &actor, &critic, &cfg0).unwrap();
    assert!(g0[0].iter().all(|g| *g == 0.0));
    assert!(grads[0].iter().any(|g| *g != 0.0));
}

#[test]
fn ippo_actor_gradient_ignores_other_agents() {
    let spec = MlpSpec::policy(7, 4);
    let a0 = init_params(&spec, 1).unwrap();
    let a1 = init_params(&spec, 2).unwrap();
    let a1b = init_params(&spec, 3).unwrap();
    let c = init_params(&MlpSpec::value(7), 4).unwrap();
    let (b0, cb) = toy_batches(&a0, &c, 0.1);
    let (b1, _) = toy_batches(&a1, &c, 0.2);
    let cfg = TrainConfig::default();
    let (_, g) = joint_loss(&[(&a0, &b0), (&a1, &b1)], &[(&c, &cb)], &cfg).unwrap();
    let (_, gb) = joint_loss(&[(&a0, &b0), (&a1b, &b1)], &[(&c, &cb)], &cfg).unwrap();
    assert_eq!(g[0], gb[0]);
}

fn fresh_rollout(alg: Algorithm, n_sats: usize, steps: usize) -> (AgentSet, RolloutBuffer) {
    let cfg = small_env(n_sats);
    let mut env = EoEnv::new(cfg.clone()).unwrap();
    let agents = AgentSet::new(alg, n_sats, cfg.obs_dim(), cfg.state_dim(), cfg.action_space(), &small_train(), 9).unwrap();
    env.reset(0);
    let mut rng = stream_rng(1, 1);
    let mut k = 0u64;
    let mut seeds = || {
        k += 1;
        k
    };
    let buf = collect_rollouts(&mut env, &agents, steps, &mut rng, &mut seeds).unwrap();
    (agents, buf)
}

#[test]
fn rollout_bookkeeping() {
    let horizon = small_env(2).horizon_steps();
    let steps = 2 * horizon + 3;
    let (agents, buf) = fresh_rollout(Algorithm::Mappo, 2, steps);
    assert_eq!(buf.len(), steps);
    for series in [buf.obs.len(), buf.states.len(), buf.actions.len(), buf.log_probs.len(), buf.values.len(), buf.dones.len()] {
        assert_eq!(series, steps);
    }
    let done_at: Vec<usize> = buf.dones.iter().enumerate().filter(|(_, d)| **d).map(|(i, _)| i).collect();
    assert_eq!(done_at, vec![horizon - 1, 2 * horizon - 1]);
    assert_eq!(buf.episodes.len(), 2);
    assert_eq!(buf.partial.unwrap().steps, 3);

    // stored behavior log-probs match a fresh forward pass
    for t in 0..steps {
        for (a, slot) in agents.actors.iter().enumerate() {
            let out = policy_forward(&slot.params, &agents.actor_input(a, &buf.obs[t])).unwrap();
            let i = slot.agents[0];
            if let Some(act) = buf.actions[t][i] {
                assert!((out.log_probs(0)[act] - buf.log_probs[t][a]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn decentralised_actor_sees_only_its_observation() {
    let cfg = small_env(3);
    let agents = AgentSet::new(Algorithm::Ippo, 3, cfg.obs_dim(), cfg.state_dim(), cfg.action_space(), &small_train(), 4).unwrap();
    let mut rng = SimRng::seed_from_u64(0);
    let mut obs: Vec<Observation> = (0..3)
        .map(|_| Observation((0..cfg.obs_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let before = agents.actor_input(1, &obs);
    obs[0].0.iter_mut().for_each(|x| *x = -*x);
    obs[2].0.iter_mut().for_each(|x| *x *= 0.5);
    assert_eq!(agents.actor_input(1, &obs), before);
    let d1 = agents.decide(&obs, &[true; 3], false, &mut SimRng::seed_from_u64(1)).unwrap();
    let d2 = agents.decide(&obs, &[true; 3], false, &mut SimRng::seed_from_u64(1)).unwrap();
    assert_eq!(d1, d2);
}

#[test]
fn central_policy_is_factored() {
    let (agents, buf) = fresh_rollout(Algorithm::CentralPpo, 4, 12);
    assert_eq!(agents.actors.len(), 1);
    let spec = agents.actors[0].params.spec();
    assert_eq!(spec.head, crate::nn::Head::Categorical { n_heads: 4, n_actions: 6 });
    assert_eq!(spec.input_dim, 4 * 18);
    assert_eq!(agents.critics[0].params.spec().input_dim, 73);
    for t in 0..buf.len() {
        let out = policy_forward(&agents.actors[0].params, &agents.actor_input(0, &buf.obs[t])).unwrap();
        let sum: f64 = (0..4).filter_map(|h| buf.actions[t][h].map(|a| out.log_probs(h)[a])).sum();
        assert!((sum - buf.log_probs[t][0]).abs() < 1e-12);
    }
}

#[test]
fn mappo_shares_one_state_critic() {
    let (agents, buf) = fresh_rollout(Algorithm::Mappo, 4, 10);
    assert_eq!(agents.critics.len(), 1);
    assert_eq!(agents.critics[0].params.spec().input_dim, 73);
    assert!(agents.actors.iter().all(|a| a.critic == 0 && a.params.spec().input_dim == 18));
    assert_eq!(buf.states[0].len(), 73);
    assert_eq!(buf.n_critics(), 1);

    let (happo, hbuf) = fresh_rollout(Algorithm::Happo, 4, 10);
    assert_eq!(happo.critics.len(), 4);
    assert!(happo.critics.iter().all(|c| c.params.spec().input_dim == 73));
    assert_eq!(hbuf.n_critics(), 4);
    let (ippo, _) = fresh_rollout(Algorithm::Ippo, 4, 10);
    assert!(ippo.critics.iter().all(|c| c.params.spec().input_dim == 18));
}

#[test]
fn happo_factor_stays_one_without_updates() {
    let cfg = TrainConfig { update_epochs: 0, ..small_train() };
    let mut t = Trainer::new(Algorithm::Happo, small_env(3), cfg, 5).unwrap();
    for _ in 0..3 {
        t.run_iteration().unwrap();
        assert_eq!(t.last_happo_factors.len(), 3);
        for m in &t.last_happo_factors {
            assert!(m.iter().all(|x| *x == 1.0));
        }
    }
}

#[test]
fn happo_factor_compounds_after_updates() {
    let mut t = Trainer::new(Algorithm::Happo, small_env(3), small_train(), 5).unwrap();
    t.run_iteration().unwrap();
    let f = &t.last_happo_factors;
    assert!(f[0].iter().all(|x| *x == 1.0));
    assert!(f[2].iter().any(|x| *x != 1.0));

    let cfg = TrainConfig { happo_compounding: false, ..small_train() };
    let mut t = Trainer::new(Algorithm::Happo, small_env(3), cfg, 5).unwrap();
    t.run_iteration().unwrap();
    assert!(t.last_happo_factors.iter().flatten().all(|x| *x == 1.0));
}

#[test]
fn happo_single_agent_and_permutations() {
    let mut t = Trainer::new(Algorithm::Happo, small_env(1), small_train(), 2).unwrap();
    t.run_iteration().unwrap();
    assert_eq!(t.last_permutation, vec![0]);
    assert!(t.last_happo_factors[0].iter().all(|x| *x == 1.0));

    let perms = |seed| {
        let mut t = Trainer::new(Algorithm::Happo, small_env(4), small_train(), seed).unwrap();
        (0..4)
            .map(|_| {
                t.run_iteration().unwrap();
                t.last_permutation.clone()
            })
            .collect::<Vec<_>>()
    };
    let a = perms(8);
    assert_eq!(a, perms(8));
    for p in &a {
        let mut s = p.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3]);
    }
}

#[test]
fn every_trainer_replays_bit_for_bit() {
    for alg in Algorithm::ALL {
        let n = if alg == Algorithm::Ppo { 1 } else { 3 };
        let a = train(alg, small_env(n), small_train(), 13).unwrap();
        let b = train(alg, small_env(n), small_train(), 13).unwrap();
        assert_eq!(a.metrics, b.metrics, "{alg}");
        assert_eq!(a.agents, b.agents, "{alg}");
        let c = train(alg, small_env(n), small_train(), 14).unwrap();
        assert_ne!(a.metrics, c.metrics, "{alg}");
    }
}

#[test]
fn ippo_with_one_agent_is_single_ppo() {
    let a = train_single_ppo(small_env(1), small_train(), 3).unwrap();
    let b = train_ippo(small_env(1), small_train(), 3).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.agents.actors, b.agents.actors);
    assert!(train_single_ppo(small_env(2), small_train(), 3).is_err());
}

#[test]
fn metrics_accounting() {
    let cfg = small_env(2);
    let horizon = cfg.horizon_steps();
    let tc = TrainConfig { total_env_steps: 5 * horizon - 1, ..small_train() };
    let out = train_mappo(cfg, tc, 1).unwrap();
    assert_eq!(out.metrics.len(), 5);
    assert_eq!(out.metrics.last().unwrap().env_steps, 5 * horizon);
    let first = out.metrics[0];
    assert!((first.entropy - 6f64.ln()).abs() < 0.01);
    assert_eq!(first.episodes, 1);
}

#[test]
fn invalid_train_configs_are_rejected() {
    for bad in [
        TrainConfig { gamma: 1.5, ..Default::default() },
        TrainConfig { gae_lambda: -0.1, ..Default::default() },
        TrainConfig { clip_eps: 0.0, ..Default::default() },
        TrainConfig { minibatches: 0, ..Default::default() },
        TrainConfig { rollout_steps: Some(0), ..Default::default() },
        TrainConfig { lr: f64::NAN, ..Default::default() },
    ] {
        assert!(bad.validate().is_err());
        assert!(Trainer::new(Algorithm::Ppo, small_env(1), bad, 0).is_err());
    }
}

fn beacon_env() -> EnvConfig {
    EnvConfig {
        fixed_targets: vec![FixedTarget { point: GroundPoint::from_degrees(10.0, 20.0).unwrap(), priority: 1.0 }],
        target_elev_min_rad: -std::f64::consts::FRAC_PI_2,
        horizon_orbits: 0.2,
        ..Default::default()
    }
}

#[test]
fn learns_to_capture_an_always_visible_target() {
    let cfg = beacon_env();
    let tc = TrainConfig { total_env_steps: 3000, ..Default::default() };
    let out = train_single_ppo(cfg.clone(), tc, 0).unwrap();
    let ev = evaluate(&out.agents, &cfg, 20, 5).unwrap();
    let hit = ev.capture_rewards.iter().filter(|r| **r == 1.0).count();
    assert!(hit as f64 / 20.0 > 0.9, "{ev:?}");
    assert_eq!(ev.total_failures, 0);
}

#[test]
fn random_baseline_is_bounded_and_consistent() {
    let cfg = EnvConfig { constellation: ConstellationSpec::cluster(4), n_targets: 300, horizon_orbits: 0.5, ..Default::default() };
    let policy = RandomPolicy { n_agents: 4, n_actions: 6 };
    let ev = evaluate(&policy, &cfg, 3, 7).unwrap();
    let total_priority = {
        let mut env = EoEnv::new(cfg.clone()).unwrap();
        env.reset(0);
        env.total_priority()
    };
    assert!(ev.capture_rewards.iter().all(|c| *c < total_priority));
    for (i, counts) in ev.action_counts.iter().enumerate() {
        assert_eq!(counts.iter().sum::<u64>(), ev.active_steps[i]);
    }
    assert_eq!(ev, evaluate(&policy, &cfg, 3, 7).unwrap());
    let hist_total: u64 = ev.capture_histogram.values().sum();
    assert_eq!(hist_total as f64, ev.mean_unique_captures * 3.0);
}

#[test]
fn evaluation_is_decentralised_and_deterministic() {
    for alg in [Algorithm::Ippo, Algorithm::Mappo, Algorithm::Happo] {
        let cfg = small_env(3);
        let out = train(alg, cfg.clone(), small_train(), 2).unwrap();
        let (ev, trace) = evaluate_traced(&out.agents, &cfg, 2, 4).unwrap();
        assert_eq!(ev, evaluate(&out.agents, &cfg, 2, 4).unwrap());
        assert!(!trace.is_empty());
        for step in &trace {
            for (i, a) in step.actions.iter().enumerate() {
                if let Some(a) = a {
                    let solo = policy_forward(&out.agents.actors[i].params, &step.obs[i]).unwrap();
                    assert_eq!(solo.greedy(0), *a);
                }
            }
        }
    }
}

#[test]
fn agent_set_round_trips_through_params() {
    let cfg = small_env(4);
    for alg in Algorithm::ALL {
        let set = AgentSet::new(alg, 4, cfg.obs_dim(), cfg.state_dim(), 6, &small_train(), 1).unwrap();
        let actors = set.actors.iter().map(|a| a.params.clone()).collect();
        let critics = set.critics.iter().map(|c| c.params.clone()).collect();
        let back = AgentSet::from_params(alg, 4, cfg.obs_dim(), cfg.state_dim(), actors, critics, 3e-4).unwrap();
        assert_eq!(back, set);
        let wrong = AgentSet::from_params(alg, 3, cfg.obs_dim(), cfg.state_dim(), vec![], vec![], 3e-4);
        assert!(wrong.is_err());
    }
}
