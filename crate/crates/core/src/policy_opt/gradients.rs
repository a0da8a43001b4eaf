//! Score-function gradient estimators and advantage estimation.
//!
//! Sign convention: every signal here is a cost to be minimized, and
//! advantages are advantages of that cost. A gradient step that decreases the
//! objective moves against the returned gradient.

use super::mlp::Cache;
use super::policy::Policy;
use super::rollout::{Episode, RolloutBatch};
use crate::error::{Error, Result};

fn check_len(batch: &RolloutBatch, n: usize, what: &str) -> Result<()> {
    if n != batch.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} {what}", batch.len()),
            actual: n.to_string(),
        });
    }
    Ok(())
}

/// `sum_{k >= t} gamma^{k-t} x_k` within each episode; zero beyond its end.
pub fn discounted_to_go(episodes: &[Episode], x: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for e in episodes {
        let mut acc = 0.0;
        for i in (e.start..e.start + e.len).rev() {
            acc = x[i] + gamma * acc;
            out[i] = acc;
        }
    }
    out
}

/// Generalized advantage estimation of `signal`:
/// `A_t = sum_k (gamma lambda)^k delta_{t+k}` with
/// `delta_t = signal_t + gamma V(s_{t+1}) - V(s_t)` and `V = 0` after the last
/// step of every episode.
pub fn gae_advantages(batch: &RolloutBatch, signal: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    check_len(batch, signal.len(), "signal entries")?;
    check_len(batch, values.len(), "values")?;
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("gamma {gamma} and lambda {lambda} must lie in [0, 1]")));
    }
    let mut adv = vec![0.0; signal.len()];
    for e in &batch.episodes {
        let mut acc = 0.0;
        let end = e.start + e.len;
        for i in (e.start..end).rev() {
            let next = if i + 1 < end { values[i + 1] } else { 0.0 };
            let delta = signal[i] + gamma * next - values[i];
            acc = delta + gamma * lambda * acc;
            adv[i] = acc;
        }
    }
    Ok(adv)
}

/// `sum_i w_i d log pi(a_i|s_i) / d theta`.
pub fn weighted_score(policy: &Policy, batch: &RolloutBatch, weights: &[f64]) -> Result<Vec<f64>> {
    check_len(batch, weights.len(), "weights")?;
    let mut grad = vec![0.0; policy.n_params()];
    let mut cache = Cache::default();
    let mut buf = Vec::new();
    for i in 0..batch.len() {
        if weights[i] == 0.0 {
            continue;
        }
        let dist = policy.dist_cached(batch.obs(i), &mut cache, &mut buf)?;
        policy.accumulate_score(&mut cache, &dist, &batch.actions[i], weights[i], &mut grad)?;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("policy gradient"));
    }
    Ok(grad)
}

/// Per-step weights `gamma^t q_t / N_episodes`.
pub fn discounted_weights(batch: &RolloutBatch, q: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_len(batch, q.len(), "q estimates")?;
    if batch.episodes.is_empty() {
        return Err(Error::Empty("rollout batch"));
    }
    let n = batch.n_episodes() as f64;
    Ok(q.iter().zip(&batch.timesteps).map(|(q, &t)| gamma.powi(t as i32) * q / n).collect())
}

/// Estimate of `d E_pi[c] / d theta = E[sum_t gamma^t grad log pi(a_t|s_t) Q(s_t, a_t)]`
/// averaged over the batch's episodes.
pub fn policy_gradient(policy: &Policy, batch: &RolloutBatch, q: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let w = discounted_weights(batch, q, gamma)?;
    weighted_score(policy, batch, &w)
}

/// `Q_log`: empirical discounted future sums of `-log pi` along each episode.
pub fn q_log(batch: &RolloutBatch, gamma: f64) -> Vec<f64> {
    let neg: Vec<f64> = batch.log_probs.iter().map(|l| -l).collect();
    discounted_to_go(&batch.episodes, &neg, gamma)
}

/// Estimate of the causal entropy gradient `E[grad log pi(a|s) Q_log(s, a)]`.
/// The batch must come from `policy`.
pub fn entropy_gradient(policy: &Policy, batch: &RolloutBatch, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Empty("rollout batch"));
    }
    policy_gradient(policy, batch, &q_log(batch, gamma), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch_with(lens: &[usize]) -> RolloutBatch {
        let mut b = RolloutBatch::new(1, 0);
        let mut start = 0;
        for &len in lens {
            b.episodes.push(Episode {
                start,
                len,
                terminated: true,
                seed: 0,
            });
            b.timesteps.extend(0..len);
            start += len;
        }
        b.actions = vec![crate::envs::Action::Discrete(0); start];
        b
    }

    /// Direct double loop over `(gamma lambda)^k delta_{t+k}`.
    fn gae_naive(b: &RolloutBatch, r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for e in &b.episodes {
            let end = e.start + e.len;
            for t in e.start..end {
                let mut a = 0.0;
                for k in t..end {
                    let next = if k + 1 < end { v[k + 1] } else { 0.0 };
                    a += (gamma * lambda).powi((k - t) as i32) * (r[k] + gamma * next - v[k]);
                }
                out[t] = a;
            }
        }
        out
    }

    #[test]
    fn gae_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = batch_with(&[7, 1, 12]);
        let r: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fast = gae_advantages(&b, &r, &v, 0.995, 0.97).unwrap();
        let slow = gae_naive(&b, &r, &v, 0.995, 0.97);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gae_special_cases() {
        let b = batch_with(&[4]);
        let r = [1.0, 2.0, 3.0, 4.0];
        let v = [0.5, -0.5, 1.0, 2.0];
        let a0 = gae_advantages(&b, &r, &v, 0.9, 0.0).unwrap();
        for t in 0..4 {
            let next = if t < 3 { v[t + 1] } else { 0.0 };
            assert_eq!(a0[t], r[t] + 0.9 * next - v[t]);
        }
        let a1 = gae_advantages(&b, &r, &[0.0; 4], 0.9, 1.0).unwrap();
        assert_eq!(a1, discounted_to_go(&b.episodes, &r, 0.9));
        assert!(gae_advantages(&b, &r, &v, 1.1, 0.5).is_err());
        assert!(gae_advantages(&b, &r[..3], &v, 0.9, 0.5).is_err());
    }

    #[test]
    fn discounted_to_go_resets_per_episode() {
        let b = batch_with(&[2, 2]);
        assert_eq!(discounted_to_go(&b.episodes, &[1.0, 1.0, 1.0, 1.0], 0.5), vec![1.5, 1.0, 1.5, 1.0]);
    }
}
