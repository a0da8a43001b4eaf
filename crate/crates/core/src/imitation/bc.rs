//! Behavioral cloning: maximum-likelihood fit of `pi(a|s)` to expert pairs
//! with Adam on minibatches and early stopping on a held-out split. Takes no
//! environment, only its spec.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExpertDataset;
use crate::envs::{Action, EnvSpec};
use crate::error::{Error, Result};
use crate::policy_opt::{Adam, Cache, Policy, PolicyArch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub arch: PolicyArch,
    pub lr: f64,
    pub minibatch: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            arch: PolicyArch::default(),
            lr: 1e-3,
            minibatch: 128,
            max_epochs: 500,
            patience: 20,
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub policy: Policy,
    /// Mean negative log-likelihood after each epoch.
    pub train_losses: Vec<f64>,
    pub valid_losses: Vec<f64>,
    pub best_epoch: usize,
}

type Pair<'a> = (&'a [f64], &'a Action);

fn split_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Splits by trajectory when there are at least two, otherwise by step within
/// the single trajectory. A single pair is used for both sides.
fn split<'a>(ds: &'a ExpertDataset, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<Pair<'a>>, Vec<Pair<'a>>) {
    let pairs_of = |k: usize| {
        let t = &ds.trajectories[k];
        t.observations.iter().map(|o| o.as_slice()).zip(&t.actions).collect::<Vec<_>>()
    };
    let n = ds.n_trajectories();
    if n >= 2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let cut = split_count(n, fraction);
        let train = order[..cut].iter().flat_map(|&k| pairs_of(k)).collect();
        let valid = order[cut..].iter().flat_map(|&k| pairs_of(k)).collect();
        return (train, valid);
    }
    let mut pairs = pairs_of(0);
    if pairs.len() == 1 {
        return (pairs.clone(), pairs);
    }
    pairs.shuffle(rng);
    let cut = split_count(pairs.len(), fraction);
    let valid = pairs.split_off(cut);
    (pairs, valid)
}

fn mean_nll(policy: &Policy, pairs: &[Pair]) -> Result<f64> {
    let mut cache = Cache::default();
    let mut buf = Vec::new();
    let mut total = 0.0;
    for (o, a) in pairs {
        total -= policy.dist_cached(o, &mut cache, &mut buf)?.log_prob(a)?;
    }
    Ok(total / pairs.len() as f64)
}

pub fn behavioral_cloning(spec: &EnvSpec, dataset: &ExpertDataset, cfg: &BcConfig) -> Result<BcOutcome> {
    dataset.check_spec(spec)?;
    if cfg.minibatch == 0 || cfg.max_epochs == 0 || !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::Config("minibatch and max_epochs must be positive, train_fraction in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut policy = Policy::new(spec, &cfg.arch, &mut rng)?;
    let (mut train, valid) = split(dataset, cfg.train_fraction, &mut rng);
    let mut adam = Adam::new(policy.n_params(), cfg.lr);
    let mut cache = Cache::default();
    let mut buf = Vec::new();
    let mut grad = vec![0.0; policy.n_params()];
    let mut best = (f64::INFINITY, 0, policy.params.clone());
    let (mut train_losses, mut valid_losses) = (Vec::new(), Vec::new());
    for epoch in 0..cfg.max_epochs {
        train.shuffle(&mut rng);
        for chunk in train.chunks(cfg.minibatch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            // Descent direction of the mean NLL: minus the mean score.
            let scale = -1.0 / chunk.len() as f64;
            for (o, a) in chunk {
                let dist = policy.dist_cached(o, &mut cache, &mut buf)?;
                policy.accumulate_score(&mut cache, &dist, a, scale, &mut grad)?;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite("behavioral cloning gradient"));
            }
            adam.step(&mut policy.params, &grad);
        }
        train_losses.push(mean_nll(&policy, &train)?);
        let v = mean_nll(&policy, &valid)?;
        valid_losses.push(v);
        if v < best.0 {
            best = (v, epoch, policy.params.clone());
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    policy.params = best.2;
    Ok(BcOutcome {
        policy,
        train_losses,
        valid_losses,
        best_epoch: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ActionSpace;
    use crate::imitation::Trajectory;

    fn spec() -> EnvSpec {
        EnvSpec::new("toy", 2, ActionSpace::Discrete(3), 10).with_bounds(vec![(-1.0, 1.0); 2])
    }

    fn small() -> BcConfig {
        BcConfig {
            arch: PolicyArch { hidden: vec![8] },
            lr: 0.01,
            ..BcConfig::default()
        }
    }

    #[test]
    fn repeated_pair_is_cloned() {
        let t = Trajectory {
            observations: vec![vec![0.3, -0.2]; 20],
            actions: vec![Action::Discrete(2); 20],
            costs: vec![0.0; 20],
            seed: 0,
        };
        let ds = ExpertDataset::new(vec![t], "x", None).unwrap();
        let out = behavioral_cloning(&spec(), &ds, &small()).unwrap();
        let p = out.policy.log_prob(&[0.3, -0.2], &Action::Discrete(2)).unwrap().exp();
        assert!(p > 0.99, "p = {p}");
    }

    #[test]
    fn early_stopping_keeps_best_validation_loss() {
        // Noisy labels: a policy can only fit the training split by
        // memorizing, so validation loss eventually rises.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trajs: Vec<Trajectory> = (0..6)
            .map(|k| {
                use rand::Rng;
                let observations: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
                let actions = observations
                    .iter()
                    .map(|o| Action::Discrete(if rng.random_bool(0.7) { (o[0] > 0.0) as usize } else { 2 }))
                    .collect();
                Trajectory { observations, actions, costs: vec![0.0; 30], seed: k }
            })
            .collect();
        let ds = ExpertDataset::new(trajs, "x", None).unwrap();
        let cfg = BcConfig { patience: 5, arch: PolicyArch { hidden: vec![32] }, lr: 0.02, ..small() };
        let out = behavioral_cloning(&spec(), &ds, &cfg).unwrap();
        let best = out.valid_losses[out.best_epoch];
        assert!(best <= *out.valid_losses.last().unwrap() + 1e-12);
        assert!(out.valid_losses.iter().all(|v| best <= *v));
        assert!(out.valid_losses.len() < cfg.max_epochs);
        assert_eq!(out.valid_losses.len(), out.best_epoch + cfg.patience + 1);
        // The returned parameters are the best epoch's.
        let (_, valid) = split(&ds, cfg.train_fraction, &mut {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            Policy::new(&spec(), &cfg.arch, &mut r).unwrap();
            r
        });
        assert!((mean_nll(&out.policy, &valid).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn split_rules() {
        let t = |n: usize| Trajectory {
            observations: vec![vec![0.0, 0.0]; n],
            actions: vec![Action::Discrete(0); n],
            costs: vec![0.0; n],
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = ExpertDataset::new(vec![t(10)], "x", None).unwrap();
        let (a, b) = split(&one, 0.7, &mut rng);
        assert_eq!((a.len(), b.len()), (7, 3));
        let many = ExpertDataset::new(vec![t(10), t(10), t(10)], "x", None).unwrap();
        let (a, b) = split(&many, 0.7, &mut rng);
        assert_eq!((a.len(), b.len()), (20, 10));
        let single = ExpertDataset::new(vec![t(1)], "x", None).unwrap();
        let (a, b) = split(&single, 0.7, &mut rng);
        assert_eq!((a.len(), b.len()), (1, 1));
    }
}
