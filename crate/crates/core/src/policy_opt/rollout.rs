//! Trajectory sampling.
//!
//! Episode `k` of a batch with base seed `s` resets its environment with
//! `episode_seed(s, 2k)` and draws actions from a generator seeded with
//! `episode_seed(s, 2k + 1)`, so a batch is the same whether collected on one
//! thread or many.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::envs::{Action, Env};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub start: usize,
    pub len: usize,
    /// Reached a terminal state rather than the horizon cap.
    pub terminated: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub obs_dim: usize,
    /// Row-major `len x obs_dim`.
    pub observations: Vec<f64>,
    pub actions: Vec<Action>,
    /// True environment costs.
    pub costs: Vec<f64>,
    /// `log pi(a_t|s_t)` under the sampling policy.
    pub log_probs: Vec<f64>,
    /// Time index of each step within its episode.
    pub timesteps: Vec<usize>,
    pub episodes: Vec<Episode>,
    pub seed: u64,
}

impl RolloutBatch {
    pub fn new(obs_dim: usize, seed: u64) -> Self {
        Self {
            obs_dim,
            seed,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    /// Undiscounted true-cost return of every episode.
    pub fn episode_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| self.costs[e.start..e.start + e.len].iter().sum()).collect()
    }

    pub fn append(&mut self, other: RolloutBatch) {
        let offset = self.len();
        self.observations.extend(other.observations);
        self.actions.extend(other.actions);
        self.costs.extend(other.costs);
        self.log_probs.extend(other.log_probs);
        self.timesteps.extend(other.timesteps);
        self.episodes.extend(other.episodes.into_iter().map(|e| Episode {
            start: e.start + offset,
            ..e
        }));
    }

    /// Largest deviation between stored and recomputed log-probabilities.
    pub fn log_prob_error(&self, policy: &Policy) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            worst = worst.max((policy.log_prob(self.obs(i), &self.actions[i])? - self.log_probs[i]).abs());
        }
        Ok(worst)
    }
}

/// SplitMix64 finalizer applied to `base + k * golden`.
pub fn episode_seed(base: u64, k: u64) -> u64 {
    let mut z = base.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How actions are chosen during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    Sample,
    Mode,
}

/// Runs one full episode. `env_seed` seeds the environment, `action_seed`
/// the action sampler.
pub fn run_episode(
    env: &mut dyn Env,
    policy: &Policy,
    env_seed: u64,
    action_seed: u64,
    selection: ActionSelection,
) -> Result<RolloutBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
    let obs_dim = env.spec().obs_dim;
    let mut batch = RolloutBatch::new(obs_dim, env_seed);
    let mut obs = env.reset(env_seed);
    let mut t = 0;
    loop {
        let dist = policy.dist(&obs)?;
        let action = match selection {
            ActionSelection::Sample => dist.sample(&mut rng),
            ActionSelection::Mode => dist.mode(),
        };
        let lp = dist.log_prob(&action)?;
        let step = env.step(&action)?;
        batch.observations.extend_from_slice(&obs);
        batch.actions.push(action);
        batch.costs.push(step.cost);
        batch.log_probs.push(lp);
        batch.timesteps.push(t);
        t += 1;
        if step.done {
            batch.episodes.push(Episode {
                start: 0,
                len: t,
                terminated: step.terminated,
                seed: env_seed,
            });
            return Ok(batch);
        }
        obs = step.observation;
    }
}

pub type EnvFactory<'a> = dyn Fn() -> Result<Box<dyn Env>> + Sync + 'a;

/// Collects whole episodes until at least `min_steps` steps are gathered.
/// With `workers > 1`, episodes are produced in rounds of `workers` and merged
/// in episode order, then cut at the same point a single worker would stop.
pub fn collect_rollouts(make_env: &EnvFactory, policy: &Policy, min_steps: usize, seed: u64, workers: usize) -> Result<RolloutBatch> {
    if min_steps == 0 {
        return Err(Error::Config("min_steps must be positive".into()));
    }
    let workers = workers.max(1);
    let mut envs: Vec<Box<dyn Env>> = (0..workers).map(|_| make_env()).collect::<Result<_>>()?;
    let mut batch = RolloutBatch::new(envs[0].spec().obs_dim, seed);
    let mut k = 0u64;
    while batch.len() < min_steps {
        let results: Vec<Result<RolloutBatch>> = if workers == 1 {
            vec![run_episode(envs[0].as_mut(), policy, episode_seed(seed, 2 * k), episode_seed(seed, 2 * k + 1), ActionSelection::Sample)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = envs
                    .iter_mut()
                    .enumerate()
                    .map(|(w, env)| {
                        let j = k + w as u64;
                        scope.spawn(move || {
                            run_episode(env.as_mut(), policy, episode_seed(seed, 2 * j), episode_seed(seed, 2 * j + 1), ActionSelection::Sample)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
            })
        };
        for r in results {
            if batch.len() >= min_steps {
                break;
            }
            batch.append(r?);
            k += 1;
        }
    }
    Ok(batch)
}
