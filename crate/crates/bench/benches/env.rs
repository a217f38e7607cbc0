use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use satmarl_bench::cluster_env;
use satmarl_core::astro::make_constellation;
use satmarl_core::env::access::windows_for_points;
use satmarl_core::env::generate_targets;
use satmarl_core::rng::SimRng;
use satmarl_core::{ActionKind, EoEnv};

fn reset(c: &mut Criterion) {
    let mut g = c.benchmark_group("env_reset");
    g.sample_size(10);
    for n in [1, 4] {
        let mut env = EoEnv::new(cluster_env(n)).unwrap();
        let mut seed = 0;
        g.bench_function(format!("cluster{n}"), |b| {
            b.iter(|| {
                seed += 1;
                env.reset(seed)
            })
        });
    }
    g.finish();
}

fn step(c: &mut Criterion) {
    let mut env = EoEnv::new(cluster_env(4)).unwrap();
    env.reset(0);
    let mut rng = SimRng::seed_from_u64(1);
    let n_act = env.action_space();
    let k = env.config().k_slots;
    c.bench_function("env_step_cluster4", |b| {
        b.iter(|| {
            if env.is_done() {
                env.reset(rng.random());
            }
            let joint: Vec<_> = env
                .active()
                .iter()
                .map(|&a| a.then(|| ActionKind::from_index(rng.random_range(0..n_act), k).unwrap()))
                .collect();
            env.step(&joint).unwrap()
        })
    });
}

fn windows(c: &mut Criterion) {
    let cfg = cluster_env(1);
    let el = make_constellation(&cfg.constellation).unwrap()[0];
    let mut rng = SimRng::seed_from_u64(2);
    let points: Vec<_> = generate_targets(cfg.n_targets, &mut rng).into_iter().map(|t| t.point).collect();
    let mut g = c.benchmark_group("access_windows");
    g.sample_size(10);
    g.bench_function("default_targets_one_horizon", |b| {
        b.iter(|| windows_for_points(&el, &points, cfg.target_elev_min_rad, cfg.horizon_s()))
    });
    g.finish();
}

criterion_group!(benches, reset, step, windows);
criterion_main!(benches);
