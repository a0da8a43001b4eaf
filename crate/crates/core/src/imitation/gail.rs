//! Generative adversarial imitation: alternate one discriminator ascent step
//! with one TRPO step against the cost `log D`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::{Discriminator, DiscriminatorConfig, EPS};
use super::{batch_entropy, batch_pairs, batch_return, ExpertDataset, IterMetrics, TrainOutcome};
use crate::error::{Error, Result};
use crate::policy_opt::{
    collect_rollouts, discounted_to_go, entropy_gradient, episode_seed, policy_gradient, EnvFactory, LearnerConfig, Policy,
    PolicyLearner, RolloutBatch,
};

/// Which increasing function of `D` the policy step minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    /// `log D`, always negative: longer episodes accumulate more negative cost.
    #[default]
    LogD,
    /// `-log(1 - D)`, always positive: favors ending episodes early, for tasks
    /// whose expert terminates before the horizon.
    NegLogOneMinusD,
}

impl CostForm {
    /// `NegLogOneMinusD` where the expert ends episodes early (mountain car),
    /// `LogD` elsewhere.
    pub fn for_env(name: &str) -> Self {
        match crate::envs::canonical_name(name) {
            Some("mountaincar") => CostForm::NegLogOneMinusD,
            _ => CostForm::LogD,
        }
    }

    fn apply(self, log_d: f64) -> f64 {
        match self {
            CostForm::LogD => log_d,
            CostForm::NegLogOneMinusD => -(-log_d.exp()).ln_1p().max(EPS.ln()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GailConfig {
    /// Causal entropy weight.
    pub lambda: f64,
    pub iters: usize,
    pub pairs_per_iter: usize,
    pub disc: DiscriminatorConfig,
    /// Discriminator steps per policy step.
    pub disc_steps: usize,
    pub cost_form: CostForm,
    pub learner: LearnerConfig,
    pub workers: usize,
    pub seed: u64,
}

impl Default for GailConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            iters: 300,
            pairs_per_iter: 5000,
            disc: DiscriminatorConfig::default(),
            disc_steps: 1,
            cost_form: CostForm::LogD,
            learner: LearnerConfig::default(),
            workers: 1,
            seed: 0,
        }
    }
}

/// Per-step policy cost `cost_form(log D(s_t, a_t)) + lambda log pi(a_t|s_t)`.
/// The `lambda` term turns minimizing its expected discounted sum into
/// minimizing `E[cost] - lambda H`.
pub fn gail_signal(disc: &Discriminator, batch: &RolloutBatch, lambda: f64, form: CostForm) -> Result<Vec<f64>> {
    let log_d = disc.costs(batch_pairs(batch))?;
    Ok(log_d.iter().zip(&batch.log_probs).map(|(l, lp)| form.apply(*l) + lambda * lp).collect())
}

/// Score-function estimate of `grad E_pi[log D] - lambda grad H(pi)` with
/// `Q` taken as the empirical discounted cost-to-go.
pub fn gail_policy_gradient(policy: &Policy, batch: &RolloutBatch, disc: &Discriminator, lambda: f64, gamma: f64) -> Result<Vec<f64>> {
    let log_d = disc.costs(batch_pairs(batch))?;
    let q = discounted_to_go(&batch.episodes, &log_d, gamma);
    let mut g = policy_gradient(policy, batch, &q, gamma)?;
    if lambda != 0.0 {
        let h = entropy_gradient(policy, batch, gamma)?;
        for (gi, hi) in g.iter_mut().zip(h) {
            *gi -= lambda * hi;
        }
    }
    Ok(g)
}

fn validate(cfg: &GailConfig) -> Result<()> {
    if cfg.iters == 0 || cfg.pairs_per_iter == 0 || cfg.disc_steps == 0 {
        return Err(Error::Config("iters, pairs_per_iter and disc_steps must be positive".into()));
    }
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be non-negative, got {}", cfg.lambda)));
    }
    Ok(())
}

/// Trains a policy by GAIL. `observer` sees every iteration's metrics as
/// they are produced.
pub fn gail_train(
    make_env: &EnvFactory,
    dataset: &ExpertDataset,
    cfg: &GailConfig,
    observer: &mut dyn FnMut(&IterMetrics),
) -> Result<TrainOutcome> {
    validate(cfg)?;
    let env = make_env()?;
    let spec = env.spec().clone();
    dataset.check_spec(&spec)?;
    let mut learner = PolicyLearner::new(&spec, cfg.learner.clone(), cfg.seed)?;
    let mut disc = Discriminator::new(&spec, &cfg.disc, &mut ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, u64::MAX)))?;
    let expert: Vec<_> = dataset.pairs().collect();
    let mut metrics = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let batch = collect_rollouts(make_env, &learner.policy, cfg.pairs_per_iter, episode_seed(cfg.seed, it as u64), cfg.workers)?;
        let pairs = batch_pairs(&batch);
        let mut disc_obj = 0.0;
        for k in 0..cfg.disc_steps {
            let obj = disc.update(&pairs, &expert)?;
            if k == 0 {
                disc_obj = obj;
            }
        }
        let signal = gail_signal(&disc, &batch, cfg.lambda, cfg.cost_form)?;
        let stats = learner.improve(&batch, &signal)?;
        let m = IterMetrics {
            iter: it,
            true_return: batch_return(&batch),
            disc_loss: -disc_obj,
            mean_kl: stats.mean_kl,
            entropy: batch_entropy(&batch),
        };
        observer(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome {
        policy: learner.policy,
        metrics,
    })
}
