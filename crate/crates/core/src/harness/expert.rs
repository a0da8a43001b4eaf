//! Expert policies trained by TRPO on the true cost.
//!
//! Mountain car's cost is flat until the goal is reached, so a randomly
//! initialized policy almost never sees a learning signal. Its expert is
//! trained on the potential-shaped cost
//! `c_t - (gamma Phi(s_{t+1}) - Phi(s_t))` with `Phi = k * energy` and
//! `Phi = 0` after the last step, which leaves optimal policies unchanged.

use serde::{Deserialize, Serialize};

use crate::envs::MountainCar;
use crate::error::{Error, Result};
use crate::imitation::{IterMetrics, TrainOutcome};
use crate::policy_opt::{collect_rollouts, episode_seed, EnvFactory, LearnerConfig, PolicyLearner, RolloutBatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shaping {
    None,
    /// Mountain car mechanical energy potential with the given scale.
    Energy(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    pub iters: usize,
    pub pairs_per_iter: usize,
    pub learner: LearnerConfig,
    pub shaping: Shaping,
    pub workers: usize,
    pub seed: u64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            iters: 100,
            pairs_per_iter: 5000,
            learner: LearnerConfig::default(),
            shaping: Shaping::None,
            workers: 1,
            seed: 0,
        }
    }
}

impl ExpertConfig {
    /// Defaults per environment: energy shaping on mountain car.
    pub fn for_env(name: &str) -> Self {
        match crate::envs::canonical_name(name) {
            Some("mountaincar") => Self {
                iters: 150,
                shaping: Shaping::Energy(3000.0),
                ..Self::default()
            },
            _ => Self::default(),
        }
    }
}

fn shaped_signal(batch: &RolloutBatch, shaping: Shaping, gamma: f64) -> Vec<f64> {
    let k = match shaping {
        Shaping::None => return batch.costs.clone(),
        Shaping::Energy(k) => k,
    };
    let mut signal = batch.costs.clone();
    for e in &batch.episodes {
        let end = e.start + e.len;
        for i in e.start..end {
            let phi = k * MountainCar::energy(batch.obs(i));
            let next = if i + 1 < end { k * MountainCar::energy(batch.obs(i + 1)) } else { 0.0 };
            signal[i] -= gamma * next - phi;
        }
    }
    signal
}

pub fn train_expert(make_env: &EnvFactory, cfg: &ExpertConfig, observer: &mut dyn FnMut(&IterMetrics)) -> Result<TrainOutcome> {
    if cfg.iters == 0 || cfg.pairs_per_iter == 0 {
        return Err(Error::Config("iters and pairs_per_iter must be positive".into()));
    }
    let env = make_env()?;
    let spec = env.spec().clone();
    if matches!(cfg.shaping, Shaping::Energy(_)) && spec.name != "mountaincar" {
        return Err(Error::Config(format!("energy shaping is defined for mountaincar, not {}", spec.name)));
    }
    let mut learner = PolicyLearner::new(&spec, cfg.learner.clone(), cfg.seed)?;
    let mut metrics = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let batch = collect_rollouts(make_env, &learner.policy, cfg.pairs_per_iter, episode_seed(cfg.seed, it as u64), cfg.workers)?;
        let signal = shaped_signal(&batch, cfg.shaping, learner.cfg.gamma);
        let stats = learner.improve(&batch, &signal)?;
        let m = IterMetrics {
            iter: it,
            true_return: crate::imitation::batch_return(&batch),
            disc_loss: 0.0,
            mean_kl: stats.mean_kl,
            entropy: crate::imitation::batch_entropy(&batch),
        };
        observer(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome {
        policy: learner.policy,
        metrics,
    })
}
