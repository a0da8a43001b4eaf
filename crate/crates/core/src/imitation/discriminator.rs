//! Learned discriminator `D_w(s, a) in (0, 1)`: high on learner pairs, low on
//! expert pairs. `log D` is the learner's surrogate cost.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{Action, ActionSpace, EnvSpec};
use crate::error::{Error, Result};
use crate::policy_opt::{Adam, Cache, Mlp};

/// Outputs are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub hidden: Vec<usize>,
    /// Adam step size.
    pub lr: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 0.01,
        }
    }
}

/// A set of state-action pairs.
pub type Pairs<'a> = [(&'a [f64], &'a Action)];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discriminator {
    action_space: ActionSpace,
    obs_bounds: Vec<(f64, f64)>,
    mlp: Mlp,
    pub params: Vec<f64>,
    adam: Adam,
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn clamp_log(x: f64) -> (f64, bool) {
    let (lo, hi) = (EPS.ln(), (-EPS).ln_1p());
    if x < lo {
        (lo, true)
    } else if x > hi {
        (hi, true)
    } else {
        (x, false)
    }
}

impl Discriminator {
    pub fn new(spec: &EnvSpec, cfg: &DiscriminatorConfig, rng: &mut impl Rng) -> Result<Self> {
        if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
            return Err(Error::Config(format!("discriminator lr must be non-negative, got {}", cfg.lr)));
        }
        let mut sizes = vec![spec.obs_dim + spec.action_space.encoding_dim()];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let mlp = Mlp::new(sizes)?;
        let params = mlp.init(rng, 0.01);
        let adam = Adam::new(params.len(), cfg.lr);
        Ok(Self {
            action_space: spec.action_space,
            obs_bounds: spec.obs_bounds.clone(),
            mlp,
            params,
            adam,
        })
    }

    pub fn lr(&self) -> f64 {
        self.adam.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.adam.lr = lr;
    }

    /// Scaled observation followed by the action encoding.
    fn input(&self, obs: &[f64], action: &Action, buf: &mut Vec<f64>) -> Result<()> {
        if obs.len() != self.obs_bounds.len() {
            return Err(Error::ShapeMismatch {
                expected: self.obs_bounds.len().to_string(),
                actual: obs.len().to_string(),
            });
        }
        if !self.action_space.contains(action) {
            return Err(Error::InvalidAction(format!("{action:?} not in {:?}", self.action_space)));
        }
        buf.clear();
        buf.extend(obs.iter().zip(&self.obs_bounds).map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0));
        action.encode_into(self.action_space, buf);
        Ok(())
    }

    fn logit_cached(&self, obs: &[f64], action: &Action, cache: &mut Cache, buf: &mut Vec<f64>) -> Result<f64> {
        self.input(obs, action, buf)?;
        self.mlp.forward_cache(&self.params, buf, cache)?;
        Ok(cache.output()[0])
    }

    pub fn logit(&self, obs: &[f64], action: &Action) -> Result<f64> {
        self.logit_cached(obs, action, &mut Cache::default(), &mut Vec::new())
    }

    /// Clamped `D(s, a)`.
    pub fn prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        Ok(self.cost(obs, action)?.exp())
    }

    /// Clamped `log D(s, a)`, in `[log 1e-8, log(1 - 1e-8)]`.
    pub fn cost(&self, obs: &[f64], action: &Action) -> Result<f64> {
        Ok(clamp_log(-softplus(-self.logit(obs, action)?)).0)
    }

    /// `log D` at every step of a batch of pairs.
    pub fn costs<'a>(&self, pairs: impl IntoIterator<Item = (&'a [f64], &'a Action)>) -> Result<Vec<f64>> {
        let mut cache = Cache::default();
        let mut buf = Vec::new();
        pairs
            .into_iter()
            .map(|(o, a)| Ok(clamp_log(-softplus(-self.logit_cached(o, a, &mut cache, &mut buf)?)).0))
            .collect()
    }

    /// Objective `mean_learner log D + mean_expert log(1 - D)` and, if
    /// requested, its gradient in `w`.
    pub fn objective_and_grad(&self, learner: &Pairs, expert: &Pairs, want_grad: bool) -> Result<(f64, Vec<f64>)> {
        if learner.is_empty() || expert.is_empty() {
            return Err(Error::Empty("discriminator sample set"));
        }
        let mut grad = vec![0.0; if want_grad { self.params.len() } else { 0 }];
        let mut cache = Cache::default();
        let mut buf = Vec::new();
        let mut total = 0.0;
        for (set, is_learner) in [(learner, true), (expert, false)] {
            let w = 1.0 / set.len() as f64;
            let mut sum = 0.0;
            for (o, a) in set.iter() {
                let z = self.logit_cached(o, a, &mut cache, &mut buf)?;
                // d/dz log sigma(z) = 1 - sigma(z); d/dz log(1 - sigma(z)) = -sigma(z).
                let (raw, dz) = if is_learner {
                    (-softplus(-z), 1.0 - sigmoid(z))
                } else {
                    (-softplus(z), -sigmoid(z))
                };
                let (val, clamped) = clamp_log(raw);
                sum += val;
                if want_grad && !clamped {
                    self.mlp.backward(&self.params, &mut cache, &[dz], w, &mut grad);
                }
            }
            total += sum * w;
        }
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("discriminator objective"));
        }
        Ok((total, grad))
    }

    pub fn objective(&self, learner: &Pairs, expert: &Pairs) -> Result<f64> {
        Ok(self.objective_and_grad(learner, expert, false)?.0)
    }

    /// One Adam ascent step on the objective. Returns the objective before
    /// the step.
    pub fn update(&mut self, learner: &Pairs, expert: &Pairs) -> Result<f64> {
        let (obj, grad) = self.objective_and_grad(learner, expert, true)?;
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.adam.step(&mut self.params, &neg);
        Ok(obj)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One discriminator update against a learner batch and the expert data.
/// Returns the objective before the step.
pub fn discriminator_update(
    disc: &mut Discriminator,
    learner: &crate::policy_opt::RolloutBatch,
    expert: &super::ExpertDataset,
    step_size: f64,
) -> Result<f64> {
    let lp: Vec<_> = (0..learner.len()).map(|i| (learner.obs(i), &learner.actions[i])).collect();
    let ep: Vec<_> = expert.pairs().collect();
    disc.set_lr(step_size);
    disc.update(&lp, &ep)
}
