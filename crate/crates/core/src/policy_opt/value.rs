//! Value-function baseline: an MLP regressing discounted cost-to-go.
//!
//! Inputs are the scaled observation plus, optionally, the scaled time index;
//! every episode end is treated as terminal, so values depend on the time left
//! before the horizon cap. Targets are standardized. When the statistics
//! change, the output layer is rescaled so the represented function is
//! unchanged.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Cache, Mlp};
use super::rollout::RolloutBatch;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub time_feature: bool,
}

impl Default for ValueConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 1e-3,
            epochs: 5,
            minibatch: 256,
            time_feature: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueFn {
    mlp: Mlp,
    pub params: Vec<f64>,
    obs_bounds: Vec<(f64, f64)>,
    horizon: usize,
    time_feature: bool,
    target_mean: f64,
    target_std: f64,
    fitted: bool,
    adam: Adam,
    base_lr: f64,
    minibatch: usize,
}

/// Full-set losses, starting with the loss before the first epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub losses: Vec<f64>,
    pub lr: f64,
}

impl ValueFn {
    pub fn new(spec: &EnvSpec, cfg: &ValueConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut sizes = vec![spec.obs_dim + usize::from(cfg.time_feature)];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let mlp = Mlp::new(sizes)?;
        let params = mlp.init(rng, 0.1);
        let adam = Adam::new(params.len(), cfg.lr);
        Ok(Self {
            mlp,
            params,
            obs_bounds: spec.obs_bounds.clone(),
            horizon: spec.horizon_cap,
            time_feature: cfg.time_feature,
            target_mean: 0.0,
            target_std: 1.0,
            fitted: false,
            adam,
            base_lr: cfg.lr,
            minibatch: cfg.minibatch.max(1),
        })
    }

    fn features(&self, obs: &[f64], t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(obs.iter().zip(&self.obs_bounds).map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0));
        if self.time_feature {
            out.push(2.0 * t as f64 / self.horizon as f64 - 1.0);
        }
    }

    pub fn predict_one(&self, obs: &[f64], t: usize) -> Result<f64> {
        let mut x = Vec::new();
        self.features(obs, t, &mut x);
        Ok(self.target_mean + self.target_std * self.mlp.forward(&self.params, &x)?[0])
    }

    pub fn predict(&self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        let mut x = Vec::new();
        let mut cache = Cache::default();
        (0..batch.len())
            .map(|i| {
                self.features(batch.obs(i), batch.timesteps[i], &mut x);
                self.mlp.forward_cache(&self.params, &x, &mut cache)?;
                Ok(self.target_mean + self.target_std * cache.output()[0])
            })
            .collect()
    }

    fn restandardize(&mut self, targets: &[f64]) {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let std = (targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-3);
        if self.fitted && (mean, std) != (self.target_mean, self.target_std) {
            let n_out_w = *self.mlp.sizes().iter().rev().nth(1).unwrap();
            let len = self.params.len();
            let ratio = self.target_std / std;
            for w in &mut self.params[len - 1 - n_out_w..len - 1] {
                *w *= ratio;
            }
            self.params[len - 1] = (self.params[len - 1] * self.target_std + self.target_mean - mean) / std;
        }
        self.target_mean = mean;
        self.target_std = std;
        self.fitted = true;
    }

    fn loss(&self, inputs: &[Vec<f64>], z: &[f64]) -> Result<f64> {
        let mut cache = Cache::default();
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(z) {
            self.mlp.forward_cache(&self.params, x, &mut cache)?;
            total += (cache.output()[0] - t).powi(2);
        }
        Ok(total / inputs.len() as f64)
    }
}

/// Regresses `targets` (aligned with the batch) for `epochs` passes of Adam
/// minibatches. An epoch that raises the full-set loss is undone and the
/// learning rate halved for the rest of the call, so the reported losses never
/// increase.
pub fn fit_value_fn(vf: &mut ValueFn, batch: &RolloutBatch, targets: &[f64], epochs: usize, rng: &mut impl Rng) -> Result<FitReport> {
    if batch.is_empty() {
        return Err(Error::Empty("value targets"));
    }
    if targets.len() != batch.len() {
        return Err(Error::ShapeMismatch {
            expected: batch.len().to_string(),
            actual: targets.len().to_string(),
        });
    }
    vf.restandardize(targets);
    vf.adam.lr = vf.base_lr;
    let inputs: Vec<Vec<f64>> = (0..batch.len())
        .map(|i| {
            let mut x = Vec::new();
            vf.features(batch.obs(i), batch.timesteps[i], &mut x);
            x
        })
        .collect();
    let z: Vec<f64> = targets.iter().map(|t| (t - vf.target_mean) / vf.target_std).collect();
    let mut prev = vf.loss(&inputs, &z)?;
    let mut losses = vec![prev];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut cache = Cache::default();
    let mut grad = vec![0.0; vf.params.len()];
    for _ in 0..epochs {
        let saved = (vf.params.clone(), vf.adam.clone());
        order.shuffle(rng);
        for chunk in order.chunks(vf.minibatch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / chunk.len() as f64;
            for &i in chunk {
                vf.mlp.forward_cache(&vf.params, &inputs[i], &mut cache)?;
                let r = cache.output()[0] - z[i];
                vf.mlp.backward(&vf.params, &mut cache, &[r], scale, &mut grad);
            }
            vf.adam.step(&mut vf.params, &grad);
        }
        let loss = vf.loss(&inputs, &z);
        match loss {
            Ok(l) if l <= prev => prev = l,
            _ => {
                let lr = vf.adam.lr * 0.5;
                vf.params = saved.0;
                vf.adam = saved.1;
                vf.adam.lr = lr;
            }
        }
        losses.push(prev);
    }
    Ok(FitReport { losses, lr: vf.adam.lr })
}
