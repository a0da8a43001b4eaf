use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use gail_core::envs::{make_env, tabularize, GridConfig};
use gail_core::imitation::{Discriminator, DiscriminatorConfig};
use gail_core::mdp::occupancy_measure;
use gail_core::policy_opt::{collect_rollouts, mlp_param_grad, natural_gradient_direction, Mlp, Policy, PolicyArch, TrpoConfig};
use gail_core::soft_rl::{soft_value_iteration, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use gail_core::TabularPolicy;

fn tabular(c: &mut Criterion) {
    let mut g = c.benchmark_group("tabular");
    for side in [5usize, 10, 20] {
        let grid = GridConfig {
            width: side,
            height: side,
            ..GridConfig::default()
        };
        let mdp = tabularize(&grid).unwrap();
        let pi = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
        let cost = mdp.true_cost().unwrap().clone();
        g.bench_with_input(BenchmarkId::new("occupancy", side), &side, |b, _| b.iter(|| occupancy_measure(&mdp, black_box(&pi)).unwrap()));
        g.bench_with_input(BenchmarkId::new("soft_vi", side), &side, |b, _| {
            b.iter(|| soft_value_iteration(&mdp, black_box(&cost), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap())
        });
    }
    g.finish();
}

fn networks(c: &mut Criterion) {
    let mut g = c.benchmark_group("mlp");
    for width in [64usize, 100] {
        let mlp = Mlp::new(vec![4, width, width, 2]).unwrap();
        let theta = mlp.init(&mut ChaCha8Rng::seed_from_u64(0), 1.0);
        let x = [0.1, -0.2, 0.3, 0.05];
        g.bench_with_input(BenchmarkId::new("forward", width), &width, |b, _| b.iter(|| mlp.forward(&theta, black_box(&x)).unwrap()));
        g.bench_with_input(BenchmarkId::new("param_grad", width), &width, |b, _| {
            b.iter(|| mlp_param_grad(&mlp, &theta, black_box(&x), &[1.0, -1.0]).unwrap())
        });
    }
    g.finish();
}

fn sampled(c: &mut Criterion) {
    let make = || make_env("cartpole", None);
    let env = make().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let policy = Policy::new(env.spec(), &PolicyArch::default(), &mut rng).unwrap();
    let batch = collect_rollouts(&make, &policy, 5000, 3, 1).unwrap();
    let grad = vec![1e-3; policy.n_params()];
    let disc = Discriminator::new(env.spec(), &DiscriminatorConfig::default(), &mut rng).unwrap();
    let pairs: Vec<_> = (0..batch.len()).map(|i| (batch.obs(i), &batch.actions[i])).collect();

    let mut g = c.benchmark_group("cartpole");
    g.sample_size(10);
    g.bench_function("rollouts_5000", |b| b.iter(|| collect_rollouts(&make, &policy, 5000, black_box(3), 1).unwrap()));
    g.bench_function("natural_gradient_5000", |b| {
        b.iter(|| natural_gradient_direction(&policy, &batch, black_box(&grad), &TrpoConfig::default()).unwrap())
    });
    g.bench_function("disc_objective_5000", |b| b.iter(|| disc.objective(black_box(&pairs), &pairs).unwrap()));
    g.finish();
}

criterion_group!(benches, tabular, networks, sampled);
criterion_main!(benches);
