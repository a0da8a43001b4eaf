//! One policy-improvement step against an arbitrary per-step cost signal:
//! GAE advantages from the value baseline, a TRPO step on
//! `sum_t gamma^t A_t ratio_t / N`, then a value refit on the signal's
//! discounted cost-to-go.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gradients::{discounted_to_go, discounted_weights, gae_advantages};
use super::policy::{Policy, PolicyArch};
use super::rollout::RolloutBatch;
use super::trpo::{trpo_step, TrpoConfig, TrpoStats};
use super::value::{fit_value_fn, ValueConfig, ValueFn};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub arch: PolicyArch,
    pub trpo: TrpoConfig,
    pub value: ValueConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            gae_lambda: 0.97,
            arch: PolicyArch::default(),
            trpo: TrpoConfig::default(),
            value: ValueConfig::default(),
        }
    }
}

pub struct PolicyLearner {
    pub policy: Policy,
    pub value: ValueFn,
    pub cfg: LearnerConfig,
    rng: ChaCha8Rng,
}

impl PolicyLearner {
    pub fn new(spec: &EnvSpec, cfg: LearnerConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = Policy::new(spec, &cfg.arch, &mut rng)?;
        let value = ValueFn::new(spec, &cfg.value, &mut rng)?;
        Ok(Self { policy, value, cfg, rng })
    }

    pub fn with_policy(spec: &EnvSpec, policy: Policy, cfg: LearnerConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let value = ValueFn::new(spec, &cfg.value, &mut rng)?;
        Ok(Self { policy, value, cfg, rng })
    }

    /// Improves the policy on `batch` (sampled from it) against `signal`.
    pub fn improve(&mut self, batch: &RolloutBatch, signal: &[f64]) -> Result<TrpoStats> {
        if signal.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("cost signal"));
        }
        let values = self.value.predict(batch)?;
        let adv = gae_advantages(batch, signal, &values, self.cfg.gamma, self.cfg.gae_lambda)?;
        let weights = discounted_weights(batch, &adv, self.cfg.gamma)?;
        let stats = trpo_step(&mut self.policy, batch, &weights, &self.cfg.trpo)?;
        if stats.accepted && stats.mean_kl > self.cfg.trpo.max_kl + 1e-6 {
            return Err(Error::Domain(format!("accepted step with KL {} above max_kl", stats.mean_kl)));
        }
        let targets = discounted_to_go(&batch.episodes, signal, self.cfg.gamma);
        fit_value_fn(&mut self.value, batch, &targets, self.cfg.value.epochs, &mut self.rng)?;
        Ok(stats)
    }
}
