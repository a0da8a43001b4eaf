//! Random tabular instances shared by the integration tests.
#![allow(dead_code)]

use gail_core::mdp::{occupancy_measure, OccupancyMeasure, SaTable, TabularMdp, TabularPolicy};
use rand::Rng;

/// Strictly positive probability vector of length `n`.
pub fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn random_mdp(rng: &mut impl Rng, n_states: usize, n_actions: usize, gamma: f64) -> TabularMdp {
    let mut p = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        p.extend(simplex(rng, n_states));
    }
    let cost = SaTable::from_fn(n_states, n_actions, |_, _| rng.random_range(-1.0..1.0));
    TabularMdp::new(n_states, n_actions, p, simplex(rng, n_states), gamma, Some(cost)).unwrap()
}

pub fn random_policy(rng: &mut impl Rng, n_states: usize, n_actions: usize) -> TabularPolicy {
    let rows: Vec<Vec<f64>> = (0..n_states).map(|_| simplex(rng, n_actions)).collect();
    TabularPolicy::new(SaTable::from_rows(rows).unwrap()).unwrap()
}

/// A random MDP of small random size together with two random policies'
/// occupancy measures.
pub fn random_pair(rng: &mut impl Rng) -> (TabularMdp, OccupancyMeasure, OccupancyMeasure) {
    let s = rng.random_range(1..=6);
    let a = rng.random_range(1..=4);
    let gamma = rng.random_range(0.5..0.99);
    let mdp = random_mdp(rng, s, a, gamma);
    let p = occupancy_measure(&mdp, &random_policy(rng, s, a)).unwrap();
    let e = occupancy_measure(&mdp, &random_policy(rng, s, a)).unwrap();
    (mdp, p, e)
}

/// `sum x log(x / y)` with `0 log 0 = 0`.
pub fn kl_sum(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}
