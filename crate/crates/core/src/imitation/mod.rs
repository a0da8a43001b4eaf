//! Imitation learners: GAIL, feature-matching apprenticeship learning (FEM
//! and GTAL), behavioral cloning, and an exact tabular GAIL oracle.
//!
//! Returns in metrics are in reward units (`-sum of true costs`), so
//! cartpole's cap is `+200` and mountain car's returns are negative.

mod apprenticeship;
mod bc;
mod dataset;
mod discriminator;
mod gail;
mod tabular;

pub use apprenticeship::{apprenticeship_step, apprenticeship_train, feature_expectations, ApprenticeshipConfig, FeatureMap};
pub use bc::{behavioral_cloning, BcConfig, BcOutcome};
pub use dataset::{ExpertDataset, Trajectory};
pub use discriminator::{discriminator_update, Discriminator, DiscriminatorConfig, Pairs, EPS};
pub use gail::{gail_policy_gradient, gail_signal, gail_train, CostForm, GailConfig};
pub use tabular::{tabular_gail_oracle, tabular_gail_oracle_with, TabularGailConfig, TabularGailOutcome};

pub(crate) use dataset::mean_std;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy_opt::{Policy, RolloutBatch};

/// Per-iteration training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterMetrics {
    pub iter: usize,
    /// Mean reward-unit return of the episodes sampled this iteration.
    pub true_return: f64,
    /// Discriminator log loss before its update (GAIL), or the fitted
    /// apprenticeship objective `max_c E_pi[c] - E_E[c]` (FEM, GTAL).
    pub disc_loss: f64,
    /// Mean KL between the old and new policy on the batch.
    pub mean_kl: f64,
    /// Per-step entropy estimate `-mean log pi(a|s)` on the batch.
    pub entropy: f64,
}

pub const METRICS_HEADER: &str = "iter,true_return,disc_loss,mean_kl,entropy";

pub fn metrics_csv(metrics: &[IterMetrics]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for m in metrics {
        w.serialize(m).map_err(crate::harness::csv_err)?;
    }
    let rows = w.into_inner().map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(format!("{METRICS_HEADER}\n{}", String::from_utf8(rows).expect("csv output is utf-8")))
}

pub fn write_metrics_csv(metrics: &[IterMetrics], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(metrics_csv(metrics)?.as_bytes())?;
    Ok(())
}

/// A trained policy with its training curve.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub metrics: Vec<IterMetrics>,
}

pub(crate) fn batch_return(batch: &RolloutBatch) -> f64 {
    let r = batch.episode_returns();
    -r.iter().sum::<f64>() / r.len().max(1) as f64
}

pub(crate) fn batch_entropy(batch: &RolloutBatch) -> f64 {
    -batch.log_probs.iter().sum::<f64>() / batch.len().max(1) as f64
}

pub(crate) fn batch_pairs(batch: &RolloutBatch) -> Vec<(&[f64], &crate::envs::Action)> {
    (0..batch.len()).map(|i| (batch.obs(i), &batch.actions[i])).collect()
}
