//! Parametric stochastic policies `pi_theta(a|s)` on an MLP trunk.
//!
//! Discrete action spaces use a categorical head over logits. Continuous
//! spaces use a diagonal Gaussian whose mean is the network output and whose
//! log-std is a state-independent parameter block appended to `theta`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Cache, Mlp};
use crate::envs::{Action, ActionSpace, EnvSpec};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyArch {
    pub hidden: Vec<usize>,
}

impl Default for PolicyArch {
    fn default() -> Self {
        Self { hidden: vec![64, 64] }
    }
}

impl PolicyArch {
    /// Two hidden layers of 100 units.
    pub fn wide() -> Self {
        Self { hidden: vec![100, 100] }
    }
}

/// Action distribution at one state.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Categorical { probs: Vec<f64>, log_probs: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

impl Dist {
    fn categorical(logits: &[f64]) -> Self {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = logits.iter().map(|l| l - lse).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Dist::Categorical { probs, log_probs }
    }

    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (Dist::Categorical { log_probs, .. }, Action::Discrete(a)) => {
                log_probs.get(*a).copied().ok_or_else(|| Error::InvalidAction(format!("action {a} out of range")))
            }
            (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) if x.len() == mean.len() => Ok(mean
                .iter()
                .zip(log_std)
                .zip(x)
                .map(|((m, ls), x)| {
                    let z = (x - m) / ls.exp();
                    -0.5 * z * z - ls - 0.5 * LN_2PI
                })
                .sum()),
            _ => Err(Error::InvalidAction(format!("{action:?} does not fit the policy head"))),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            Dist::Categorical { probs, log_probs } => -probs.iter().zip(log_probs).map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 }).sum::<f64>(),
            Dist::Gaussian { log_std, .. } => log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum(),
        }
    }

    /// `KL(self || other)`.
    pub fn kl(&self, other: &Dist) -> f64 {
        match (self, other) {
            (Dist::Categorical { probs, log_probs }, Dist::Categorical { log_probs: lq, .. }) => probs
                .iter()
                .zip(log_probs.iter().zip(lq))
                .map(|(p, (lp, lq))| if *p > 0.0 { p * (lp - lq) } else { 0.0 })
                .sum(),
            (Dist::Gaussian { mean: m0, log_std: s0 }, Dist::Gaussian { mean: m1, log_std: s1 }) => (0..m0.len())
                .map(|i| {
                    let v0 = (2.0 * s0[i]).exp();
                    let v1 = (2.0 * s1[i]).exp();
                    s1[i] - s0[i] + (v0 + (m0[i] - m1[i]).powi(2)) / (2.0 * v1) - 0.5
                })
                .sum(),
            _ => f64::NAN,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Action {
        match self {
            Dist::Categorical { probs, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Action::Discrete(i);
                    }
                }
                Action::Discrete(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            }
            Dist::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter().zip(log_std).map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal)).collect(),
            ),
        }
    }

    /// Most likely action (lowest index on ties).
    pub fn mode(&self) -> Action {
        match self {
            Dist::Categorical { probs, .. } => {
                let mut best = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > probs[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
            Dist::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Policy {
    action_space: ActionSpace,
    obs_bounds: Vec<(f64, f64)>,
    mlp: Mlp,
    pub params: Vec<f64>,
}

impl Policy {
    /// Random orthogonal initialization with a small output layer, so the
    /// initial policy is close to uniform (or zero-mean, unit-std).
    pub fn new(spec: &EnvSpec, arch: &PolicyArch, rng: &mut impl Rng) -> Result<Self> {
        let out = spec.action_space.encoding_dim();
        let mut sizes = vec![spec.obs_dim];
        sizes.extend_from_slice(&arch.hidden);
        sizes.push(out);
        let mlp = Mlp::new(sizes)?;
        let mut params = mlp.init(rng, 0.01);
        if let ActionSpace::Continuous(d) = spec.action_space {
            params.extend(std::iter::repeat(0.0).take(d));
        }
        Ok(Self {
            action_space: spec.action_space,
            obs_bounds: spec.obs_bounds.clone(),
            mlp,
            params,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn action_space(&self) -> ActionSpace {
        self.action_space
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Gaussian log-std block, empty for categorical policies.
    pub fn log_std(&self) -> &[f64] {
        &self.params[self.mlp.n_params()..]
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_bounds.len()
    }

    /// Input features: observations affinely scaled to `[-1, 1]`.
    pub fn features(&self, obs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(obs.iter().zip(&self.obs_bounds).map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0));
    }

    fn trunk(&self) -> &[f64] {
        &self.params[..self.mlp.n_params()]
    }

    fn dist_from_output(&self, out: &[f64], log_std: &[f64]) -> Dist {
        match self.action_space {
            ActionSpace::Discrete(_) => Dist::categorical(out),
            ActionSpace::Continuous(_) => Dist::Gaussian {
                mean: out.to_vec(),
                log_std: log_std.to_vec(),
            },
        }
    }

    /// Forward pass with activations kept for backprop or JVPs.
    pub fn dist_cached(&self, obs: &[f64], cache: &mut Cache, buf: &mut Vec<f64>) -> Result<Dist> {
        if obs.len() != self.obs_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.obs_dim().to_string(),
                actual: obs.len().to_string(),
            });
        }
        self.features(obs, buf);
        self.mlp.forward_cache(self.trunk(), buf, cache)?;
        Ok(self.dist_from_output(cache.output(), self.log_std()))
    }

    pub fn dist(&self, obs: &[f64]) -> Result<Dist> {
        self.dist_cached(obs, &mut Cache::default(), &mut Vec::new())
    }

    pub fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        self.dist(obs)?.log_prob(action)
    }

    pub fn act(&self, obs: &[f64], rng: &mut impl Rng) -> Result<Action> {
        Ok(self.dist(obs)?.sample(rng))
    }

    /// Adds `scale * d log pi(action|obs) / d theta` to `grad`, given a cache
    /// and distribution from [`Policy::dist_cached`] at `obs`.
    pub fn accumulate_score(&self, cache: &mut Cache, dist: &Dist, action: &Action, scale: f64, grad: &mut [f64]) -> Result<()> {
        let n = self.mlp.n_params();
        let (trunk_grad, std_grad) = grad.split_at_mut(n);
        match (dist, action) {
            (Dist::Categorical { probs, .. }, Action::Discrete(a)) => {
                let seed: Vec<f64> = probs.iter().enumerate().map(|(i, p)| if i == *a { 1.0 - p } else { -p }).collect();
                self.mlp.backward(self.trunk(), cache, &seed, scale, trunk_grad);
            }
            (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) => {
                let mut seed = Vec::with_capacity(mean.len());
                for i in 0..mean.len() {
                    let var = (2.0 * log_std[i]).exp();
                    let r = x[i] - mean[i];
                    seed.push(r / var);
                    std_grad[i] += scale * (r * r / var - 1.0);
                }
                self.mlp.backward(self.trunk(), cache, &seed, scale, trunk_grad);
            }
            _ => return Err(Error::InvalidAction(format!("{action:?} does not fit the policy head"))),
        }
        Ok(())
    }

    /// `d log pi(action|obs) / d theta`.
    pub fn score(&self, obs: &[f64], action: &Action) -> Result<Vec<f64>> {
        let mut cache = Cache::default();
        let dist = self.dist_cached(obs, &mut cache, &mut Vec::new())?;
        let mut g = vec![0.0; self.n_params()];
        self.accumulate_score(&mut cache, &dist, action, 1.0, &mut g)?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Policy = serde_json::from_str(text)?;
        let expected = p.mlp.n_params()
            + match p.action_space {
                ActionSpace::Continuous(d) => d,
                ActionSpace::Discrete(_) => 0,
            };
        if p.params.len() != expected || p.mlp.input_dim() != p.obs_bounds.len() {
            return Err(Error::Config("policy parameters inconsistent with architecture".into()));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn spec(space: ActionSpace) -> EnvSpec {
        EnvSpec::new("toy", 3, space, 10).with_bounds(vec![(-1.0, 1.0); 3])
    }

    fn perturbed(space: ActionSpace, seed: u64) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Policy::new(&spec(space), &PolicyArch { hidden: vec![5] }, &mut rng).unwrap();
        for v in p.params.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        p
    }

    #[test]
    fn categorical_probs_sum_to_one() {
        let p = perturbed(ActionSpace::Discrete(4), 1);
        match p.dist(&[0.2, -0.4, 0.9]).unwrap() {
            Dist::Categorical { probs, .. } => assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn score_matches_central_differences() {
        let obs = [0.3, 0.1, -0.8];
        for (space, action) in [
            (ActionSpace::Discrete(3), Action::Discrete(2)),
            (ActionSpace::Continuous(2), Action::Continuous(vec![0.4, -1.1])),
        ] {
            let p = perturbed(space, 2);
            let g = p.score(&obs, &action).unwrap();
            let h = 1e-5;
            for i in 0..p.n_params() {
                let mut a = p.clone();
                a.params[i] += h;
                let mut b = p.clone();
                b.params[i] -= h;
                let fd = (a.log_prob(&obs, &action).unwrap() - b.log_prob(&obs, &action).unwrap()) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1e-3);
                assert!(rel < 1e-6, "{space:?} param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let p = perturbed(ActionSpace::Continuous(1), 3);
        let d = p.dist(&[0.0, 0.5, -0.5]).unwrap();
        let (lo, hi, n) = (-40.0, 40.0, 80_000);
        let h = (hi - lo) / n as f64;
        // Composite Simpson rule.
        let mut acc = 0.0;
        for k in 0..=n {
            let x = lo + h * k as f64;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * d.log_prob(&Action::Continuous(vec![x])).unwrap().exp();
        }
        assert!((acc * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kl_is_zero_on_self_and_positive_elsewhere() {
        let p = perturbed(ActionSpace::Discrete(3), 4);
        let q = perturbed(ActionSpace::Discrete(3), 5);
        let obs = [0.1, 0.2, 0.3];
        let (dp, dq) = (p.dist(&obs).unwrap(), q.dist(&obs).unwrap());
        assert!(dp.kl(&dp).abs() < 1e-15);
        assert!(dp.kl(&dq) > 0.0);
        let g = Dist::Gaussian { mean: vec![0.0], log_std: vec![0.0] };
        let g2 = Dist::Gaussian { mean: vec![1.0], log_std: vec![0.0] };
        assert!((g.kl(&g2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_log_std_starts_at_zero() {
        let p = Policy::new(&spec(ActionSpace::Continuous(2)), &PolicyArch::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.log_std(), &[0.0, 0.0]);
    }

    #[test]
    fn json_round_trip() {
        let p = perturbed(ActionSpace::Discrete(2), 6);
        let q = Policy::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p.params, q.params);
    }

    #[test]
    fn entropy_of_uniform_categorical() {
        let d = Dist::categorical(&[0.0, 0.0, 0.0]);
        assert!((d.entropy() - 3f64.ln()).abs() < 1e-15);
    }
}
