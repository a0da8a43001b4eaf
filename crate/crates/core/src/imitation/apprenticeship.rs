//! Apprenticeship learning on continuous-state tasks: linear costs
//! `c(s) = w . phi(s)` over a fixed feature map, with the worst-case `w` over
//! the l2 ball (FEM) or the simplex (GTAL) refit analytically each iteration
//! from empirical discounted feature expectations.

use serde::{Deserialize, Serialize};

use super::{batch_entropy, batch_return, ExpertDataset, IterMetrics, TrainOutcome};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::policy_opt::{collect_rollouts, episode_seed, EnvFactory, LearnerConfig, PolicyLearner, RolloutBatch, TrpoStats};
use crate::regularizers::{fit_cost_weights, CostClassKind};

/// Observation components scaled to `[-1, 1]`, their pairwise products
/// (squares included) and a bias, each clamped to `[-1, 1]`. The simplex
/// class also gets every feature negated, so that its hull can put either
/// sign on a feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    obs_bounds: Vec<(f64, f64)>,
    negated: bool,
}

impl FeatureMap {
    pub fn new(spec: &EnvSpec, kind: CostClassKind) -> Self {
        Self {
            obs_bounds: spec.obs_bounds.clone(),
            negated: kind == CostClassKind::ConvexHull,
        }
    }

    pub fn dim(&self) -> usize {
        let d = self.obs_bounds.len();
        let base = d + d * (d + 1) / 2 + 1;
        if self.negated {
            2 * base
        } else {
            base
        }
    }

    pub fn features(&self, obs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let z: Vec<f64> = obs
            .iter()
            .zip(&self.obs_bounds)
            .map(|(x, (lo, hi))| (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            .collect();
        out.extend_from_slice(&z);
        for i in 0..z.len() {
            for j in i..z.len() {
                out.push(z[i] * z[j]);
            }
        }
        out.push(1.0);
        if self.negated {
            let n = out.len();
            for k in 0..n {
                out.push(-out[k]);
            }
        }
    }
}

/// `(1/N) sum_episodes sum_t gamma^t phi(s_t)` over the episodes of a batch.
pub fn feature_expectations(map: &FeatureMap, batch: &RolloutBatch, gamma: f64) -> Vec<f64> {
    let mut acc = vec![0.0; map.dim()];
    let mut buf = Vec::new();
    for i in 0..batch.len() {
        map.features(batch.obs(i), &mut buf);
        let w = gamma.powi(batch.timesteps[i] as i32);
        for (a, f) in acc.iter_mut().zip(&buf) {
            *a += w * f;
        }
    }
    let n = batch.n_episodes().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn dataset_feature_expectations(map: &FeatureMap, ds: &ExpertDataset, gamma: f64) -> Vec<f64> {
    let mut acc = vec![0.0; map.dim()];
    let mut buf = Vec::new();
    for t in &ds.trajectories {
        let mut disc = 1.0;
        for o in &t.observations {
            map.features(o, &mut buf);
            for (a, f) in acc.iter_mut().zip(&buf) {
                *a += disc * f;
            }
            disc *= gamma;
        }
    }
    let n = ds.n_trajectories() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApprenticeshipConfig {
    pub iters: usize,
    pub pairs_per_iter: usize,
    pub learner: LearnerConfig,
    pub workers: usize,
    pub seed: u64,
}

impl Default for ApprenticeshipConfig {
    fn default() -> Self {
        Self {
            iters: 300,
            pairs_per_iter: 5000,
            learner: LearnerConfig::default(),
            workers: 1,
            seed: 0,
        }
    }
}

/// One alternation: fit the worst-case cost on `batch` against the expert's
/// feature expectations, then take a policy step against it. Returns the
/// fitted objective `max_w w . (e_pi - e_E)` and the step statistics.
pub fn apprenticeship_step(
    learner: &mut PolicyLearner,
    map: &FeatureMap,
    kind: CostClassKind,
    batch: &RolloutBatch,
    expert_fe: &[f64],
) -> Result<(f64, TrpoStats)> {
    let fe = feature_expectations(map, batch, learner.cfg.gamma);
    let gap: Vec<f64> = fe.iter().zip(expert_fe).map(|(a, b)| a - b).collect();
    let (w, value) = fit_cost_weights(kind, &gap)?;
    if w.iter().all(|x| *x == 0.0) {
        // Zero cost: the objective is flat in the policy.
        return Ok((value, TrpoStats::default()));
    }
    let mut buf = Vec::new();
    let signal: Vec<f64> = (0..batch.len())
        .map(|i| {
            map.features(batch.obs(i), &mut buf);
            buf.iter().zip(&w).map(|(f, w)| f * w).sum()
        })
        .collect();
    let stats = learner.improve(batch, &signal)?;
    Ok((value, stats))
}

/// FEM (`LinearBall`) or GTAL (`ConvexHull`) training.
pub fn apprenticeship_train(
    make_env: &EnvFactory,
    dataset: &ExpertDataset,
    kind: CostClassKind,
    cfg: &ApprenticeshipConfig,
    observer: &mut dyn FnMut(&IterMetrics),
) -> Result<TrainOutcome> {
    if cfg.iters == 0 || cfg.pairs_per_iter == 0 {
        return Err(Error::Config("iters and pairs_per_iter must be positive".into()));
    }
    let env = make_env()?;
    let spec = env.spec().clone();
    dataset.check_spec(&spec)?;
    let map = FeatureMap::new(&spec, kind);
    let expert_fe = dataset_feature_expectations(&map, dataset, cfg.learner.gamma);
    let mut learner = PolicyLearner::new(&spec, cfg.learner.clone(), cfg.seed)?;
    let mut metrics = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let batch = collect_rollouts(make_env, &learner.policy, cfg.pairs_per_iter, episode_seed(cfg.seed, it as u64), cfg.workers)?;
        let (value, stats) = apprenticeship_step(&mut learner, &map, kind, &batch, &expert_fe)?;
        let m = IterMetrics {
            iter: it,
            true_return: batch_return(&batch),
            disc_loss: value,
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
