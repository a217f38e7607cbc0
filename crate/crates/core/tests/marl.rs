use proptest::prelude::*;
use satmarl_core::marl::{compute_gae, evaluate, normalize_advantages, train};
use satmarl_core::nn::{init_params, load_params, save_params, value_forward};
use satmarl_core::{Algorithm, ConstellationSpec, EnvConfig, MlpSpec, RandomPolicy, TrainConfig};

fn tiny_env(n: usize) -> EnvConfig {
    EnvConfig {
        constellation: ConstellationSpec::cluster(n),
        n_targets: 80,
        horizon_orbits: 0.2,
        ..EnvConfig::default()
    }
}

fn tiny_train() -> TrainConfig {
    TrainConfig {
        total_env_steps: 160,
        update_epochs: 2,
        minibatches: 2,
        hidden: vec![16],
        ..TrainConfig::default()
    }
}

#[test]
fn every_algorithm_trains_and_replays() {
    for alg in [Algorithm::Ppo, Algorithm::CentralPpo, Algorithm::Ippo, Algorithm::Mappo, Algorithm::Happo] {
        let n = if alg == Algorithm::Ppo { 1 } else { 3 };
        let a = train(alg, tiny_env(n), tiny_train(), 5).unwrap();
        let b = train(alg, tiny_env(n), tiny_train(), 5).unwrap();
        assert!(!a.metrics.is_empty(), "{alg:?}");
        assert_eq!(a.metrics, b.metrics, "{alg:?}");
        assert!(a.metrics.iter().all(|m| m.mean_return.is_finite()));
        let eval = evaluate(&a.agents, &tiny_env(n), 2, 0).unwrap();
        assert_eq!(eval.episodes, 2);
        assert_eq!(eval.agent_unique_captures.len(), n);
    }
}

#[test]
fn random_policy_counts_actions_for_active_steps() {
    let cfg = tiny_env(2);
    let m = evaluate(&RandomPolicy { n_agents: 2, n_actions: cfg.action_space() }, &cfg, 3, 1).unwrap();
    for i in 0..2 {
        assert_eq!(m.action_counts[i].iter().sum::<u64>(), m.active_steps[i]);
    }
    let unique: u64 = m.capture_histogram.values().sum();
    assert!((unique as f64 / 3.0 - m.mean_unique_captures).abs() < 1e-9);
}

#[test]
fn checkpoint_file_round_trip() {
    let spec = MlpSpec::value(7).with_hidden(vec![5, 4]);
    let p = init_params(&spec, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("critic.bin");
    save_params(&path, &p).unwrap();
    let q = load_params(&path).unwrap();
    assert_eq!(p, q);
    let x = [0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 0.5];
    assert_eq!(value_forward(&p, &x).unwrap(), value_forward(&q, &x).unwrap());
    std::fs::write(&path, b"SMNN").unwrap();
    assert!(load_params(&path).is_err());
}

proptest! {
    #[test]
    fn gae_without_bootstrap_cut_is_discounted_return(
        rewards in prop::collection::vec(-3.0f64..3.0, 1..20),
        gamma in 0.0f64..=1.0,
    ) {
        let n = rewards.len();
        let values = vec![0.0; n + 1];
        let mut dones = vec![false; n];
        dones[n - 1] = true;
        let (adv, ret) = compute_gae(&rewards, &values, &dones, gamma, 1.0).unwrap();
        for t in 0..n {
            let g: f64 = rewards[t..].iter().enumerate().map(|(k, r)| gamma.powi(k as i32) * r).sum();
            prop_assert!((ret[t] - g).abs() < 1e-10);
            prop_assert!((adv[t] - g).abs() < 1e-10);
        }
    }

    #[test]
    fn one_step_gae_is_td_error(
        rewards in prop::collection::vec(-3.0f64..3.0, 1..20),
        seed_values in prop::collection::vec(-3.0f64..3.0, 21),
        gamma in 0.0f64..=1.0,
    ) {
        let n = rewards.len();
        let values = &seed_values[..=n];
        let dones = vec![false; n];
        let (adv, _) = compute_gae(&rewards, values, &dones, gamma, 0.0).unwrap();
        for t in 0..n {
            prop_assert!((adv[t] - (rewards[t] + gamma * values[t + 1] - values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_advantages_are_standardized(
        adv in prop::collection::vec(-10.0f64..10.0, 3..40),
    ) {
        let spread = adv.iter().cloned().fold(f64::MIN, f64::max) - adv.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-3);
        let w = vec![1.0; adv.len()];
        let z = normalize_advantages(&adv, &w);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!(z.iter().all(|x| x.is_finite()));
    }
}
