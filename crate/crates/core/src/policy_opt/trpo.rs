//! KL-constrained natural-gradient step.
//!
//! The Fisher matrix is the Hessian of the mean `KL(pi_old || pi_theta)` over
//! batch states at `theta_old`. For the heads used here it equals the exact
//! Gauss-Newton product `J^T M J`, with `M = diag(p) - p p^T` on categorical
//! logits and `M = diag(1 / sigma^2)` on Gaussian means (`2 I` on the log-std
//! block), so no second-order differentiation is needed.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Cache;
use super::policy::{Dist, Policy};
use super::rollout::RolloutBatch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrpoConfig {
    pub max_kl: f64,
    pub cg_iters: usize,
    pub damping: f64,
    pub backtracks: usize,
    /// Fraction of batch states used for Fisher-vector products.
    pub fvp_subsample: f64,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            max_kl: 0.01,
            cg_iters: 10,
            damping: 0.1,
            backtracks: 10,
            fvp_subsample: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrpoStats {
    pub accepted: bool,
    /// Mean KL over batch states of the accepted step (0 if rejected).
    pub mean_kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    /// `0.5^k` for the accepted backtrack `k`.
    pub step_fraction: f64,
    pub grad_norm: f64,
}

/// Damped Fisher-vector products `(F + damping I) v` at fixed parameters.
pub struct FisherOperator<'a> {
    policy: &'a Policy,
    caches: Vec<Cache>,
    dists: Vec<Dist>,
    damping: f64,
    u: Vec<f64>,
}

impl<'a> FisherOperator<'a> {
    pub fn new(policy: &'a Policy, batch: &RolloutBatch, indices: &[usize], damping: f64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("Fisher states"));
        }
        let mut caches = Vec::with_capacity(indices.len());
        let mut dists = Vec::with_capacity(indices.len());
        let mut buf = Vec::new();
        for &i in indices {
            let mut c = Cache::default();
            dists.push(policy.dist_cached(batch.obs(i), &mut c, &mut buf)?);
            caches.push(c);
        }
        Ok(Self {
            policy,
            caches,
            dists,
            damping,
            u: Vec::new(),
        })
    }

    pub fn apply(&mut self, v: &[f64]) -> Vec<f64> {
        let mlp = self.policy.mlp();
        let n_trunk = mlp.n_params();
        let trunk = &self.policy.params[..n_trunk];
        let scale = 1.0 / self.caches.len() as f64;
        let mut out = vec![0.0; v.len()];
        let mut seed = Vec::new();
        for (cache, dist) in self.caches.iter_mut().zip(&self.dists) {
            mlp.jvp(trunk, cache, &v[..n_trunk], &mut self.u);
            seed.clear();
            match dist {
                Dist::Categorical { probs, .. } => {
                    let pu: f64 = probs.iter().zip(&self.u).map(|(p, u)| p * u).sum();
                    seed.extend(probs.iter().zip(&self.u).map(|(p, u)| p * (u - pu)));
                }
                Dist::Gaussian { log_std, .. } => {
                    seed.extend(self.u.iter().zip(log_std).map(|(u, ls)| u * (-2.0 * ls).exp()));
                }
            }
            mlp.backward(trunk, cache, &seed, scale, &mut out[..n_trunk]);
        }
        for j in n_trunk..v.len() {
            out[j] += 2.0 * v[j];
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += self.damping * x;
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximately solves `A x = b` for symmetric positive definite `A`.
pub fn conjugate_gradient(mut apply: impl FnMut(&[f64]) -> Vec<f64>, b: &[f64], iters: usize) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr < 1e-20 {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    x
}

fn fisher_indices(batch: &RolloutBatch, fraction: f64) -> Vec<usize> {
    let n = batch.len();
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(batch.seed ^ 0xF15E);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// `x = (F + damping I)^{-1} g` by conjugate gradient.
pub fn natural_gradient_direction(policy: &Policy, batch: &RolloutBatch, g: &[f64], cfg: &TrpoConfig) -> Result<Vec<f64>> {
    let idx = fisher_indices(batch, cfg.fvp_subsample);
    let mut op = FisherOperator::new(policy, batch, &idx, cfg.damping)?;
    Ok(conjugate_gradient(|v| op.apply(v), g, cfg.cg_iters))
}

/// `sum_i w_i exp(log pi(a_i|s_i) - log pi_old(a_i|s_i))` and the mean KL from
/// `old` over batch states.
pub fn surrogate_and_kl(policy: &Policy, batch: &RolloutBatch, weights: &[f64], old: &[Dist]) -> Result<(f64, f64)> {
    let mut cache = Cache::default();
    let mut buf = Vec::new();
    let (mut surr, mut kl) = (0.0, 0.0);
    for i in 0..batch.len() {
        let d = policy.dist_cached(batch.obs(i), &mut cache, &mut buf)?;
        surr += weights[i] * (d.log_prob(&batch.actions[i])? - batch.log_probs[i]).exp();
        kl += old[i].kl(&d);
    }
    Ok((surr, kl / batch.len() as f64))
}

/// One TRPO step on the surrogate with per-step weights `weights`
/// (the gradient at `theta_old` is `sum_i w_i grad log pi`).
pub fn trpo_step(policy: &mut Policy, batch: &RolloutBatch, weights: &[f64], cfg: &TrpoConfig) -> Result<TrpoStats> {
    let g = super::gradients::weighted_score(policy, batch, weights)?;
    trpo_step_with_grad(policy, &g, batch, weights, cfg)
}

/// As [`trpo_step`] with a precomputed objective gradient.
pub fn trpo_step_with_grad(policy: &mut Policy, g: &[f64], batch: &RolloutBatch, weights: &[f64], cfg: &TrpoConfig) -> Result<TrpoStats> {
    if !(cfg.max_kl > 0.0) {
        return Err(Error::Config(format!("max_kl must be positive, got {}", cfg.max_kl)));
    }
    if g.len() != policy.n_params() || weights.len() != batch.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} params, {} weights", policy.n_params(), batch.len()),
            actual: format!("{} params, {} weights", g.len(), weights.len()),
        });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("objective gradient"));
    }
    let grad_norm = dot(g, g).sqrt();
    let surrogate_before: f64 = weights.iter().sum();
    let mut stats = TrpoStats {
        accepted: false,
        mean_kl: 0.0,
        surrogate_before,
        surrogate_after: surrogate_before,
        step_fraction: 0.0,
        grad_norm,
    };
    if grad_norm == 0.0 || batch.is_empty() {
        return Ok(stats);
    }
    let idx = fisher_indices(batch, cfg.fvp_subsample);
    let (x, shs) = {
        let mut op = FisherOperator::new(policy, batch, &idx, cfg.damping)?;
        let x = conjugate_gradient(|v| op.apply(v), g, cfg.cg_iters);
        let fx = op.apply(&x);
        let shs = dot(&x, &fx);
        (x, shs)
    };
    if !(shs > 0.0) || !shs.is_finite() {
        return Ok(stats);
    }
    let beta = (2.0 * cfg.max_kl / shs).sqrt();
    let old: Vec<Dist> = (0..batch.len()).map(|i| policy.dist(batch.obs(i))).collect::<Result<_>>()?;
    let theta0 = policy.params.clone();
    let mut frac = 1.0;
    for _ in 0..=cfg.backtracks {
        for (p, (t0, xi)) in policy.params.iter_mut().zip(theta0.iter().zip(&x)) {
            *p = t0 - frac * beta * xi;
        }
        if let Ok((surr, kl)) = surrogate_and_kl(policy, batch, weights, &old) {
            if surr < surrogate_before && kl <= cfg.max_kl && kl.is_finite() {
                stats.accepted = true;
                stats.mean_kl = kl;
                stats.surrogate_after = surr;
                stats.step_fraction = frac;
                return Ok(stats);
            }
        }
        frac *= 0.5;
    }
    policy.params = theta0;
    Ok(stats)
}
