//! Experiment plumbing: expert training, demonstration sampling, evaluation,
//! scaled scores, dataset-size sweeps and their CSV/SVG artifacts.

mod experiment;
mod expert;
mod plot;

pub use experiment::{
    exact_match_run, gap_history_csv, read_scores_csv, run_experiment, scores_csv, tabular_gail_run, Algorithm, ExactMatchReport, RunConfig,
};
pub use expert::{train_expert, ExpertConfig, Shaping};
pub use plot::{emit_plot, render_svg};

pub(crate) use experiment::csv_err;

use serde::{Deserialize, Serialize};

use crate::envs::{make_env, Env, GridConfig};
use crate::error::{Error, Result};
use crate::imitation::{mean_std, ExpertDataset};
use crate::policy_opt::{episode_seed, run_episode, ActionSelection, Policy, RolloutBatch};

pub const DEFAULT_EVAL_EPISODES: usize = 50;

/// Environment constructor by name, usable as a rollout factory.
pub fn env_factory(name: &str, grid: Option<GridConfig>) -> Result<impl Fn() -> Result<Box<dyn Env>> + Sync> {
    make_env(name, grid.as_ref())?;
    let name = name.to_string();
    Ok(move || make_env(&name, grid.as_ref()))
}

fn episodes(env: &mut dyn Env, policy: &Policy, n: usize, seed: u64, selection: ActionSelection) -> Result<Vec<RolloutBatch>> {
    (0..n as u64)
        .map(|k| run_episode(env, policy, episode_seed(seed, 2 * k), episode_seed(seed, 2 * k + 1), selection))
        .collect()
}

/// `n` full episodes of `policy` with sampled actions, seeded deterministically.
pub fn sample_trajectories(env: &mut dyn Env, policy: &Policy, n: usize, seed: u64, source: &str) -> Result<ExpertDataset> {
    if n == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    let mut batch = RolloutBatch::new(env.spec().obs_dim, seed);
    for b in episodes(env, policy, n, seed, ActionSelection::Sample)? {
        batch.append(b);
    }
    ExpertDataset::from_batch(&batch, source, Some(seed))
}

/// Mean and standard deviation of reward-unit returns over `n_episodes`.
pub fn evaluate(env: &mut dyn Env, policy: &Policy, n_episodes: usize, seed: u64, selection: ActionSelection) -> Result<(f64, f64)> {
    Ok(mean_std(&evaluation_returns(env, policy, n_episodes, seed, selection)?))
}

/// Reward-unit return of each evaluation episode.
pub fn evaluation_returns(env: &mut dyn Env, policy: &Policy, n_episodes: usize, seed: u64, selection: ActionSelection) -> Result<Vec<f64>> {
    if n_episodes == 0 {
        return Err(Error::Config("need at least one evaluation episode".into()));
    }
    Ok(episodes(env, policy, n_episodes, seed, selection)?
        .iter()
        .map(|b| -b.costs.iter().sum::<f64>())
        .collect())
}

/// `(raw - random) / (expert - random)`: 0 for random, 1 for the expert.
pub fn scaled_score(raw: f64, random_ref: f64, expert_ref: f64) -> Result<f64> {
    let span = expert_ref - random_ref;
    if !(span.abs() > 1e-12) || !raw.is_finite() || !span.is_finite() {
        return Err(Error::Domain(format!("degenerate references: random {random_ref}, expert {expert_ref}")));
    }
    Ok((raw - random_ref) / span)
}

/// Aggregate result of one (algorithm, dataset size) cell over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub algorithm: String,
    pub trajectories: usize,
    /// Seeds that finished; failed seeds are excluded.
    pub seeds: usize,
    /// Over all evaluation episodes of all finished seeds.
    pub raw_mean: f64,
    pub raw_std: f64,
    pub scaled: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::CartPole;
    use crate::policy_opt::PolicyArch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_policy(env: &dyn Env, seed: u64) -> Policy {
        Policy::new(env.spec(), &PolicyArch::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn scaled_score_references() {
        assert_eq!(scaled_score(200.0, 18.64, 200.0).unwrap(), 1.0);
        assert_eq!(scaled_score(18.64, 18.64, 200.0).unwrap(), 0.0);
        assert!((scaled_score(72.02, 18.64, 200.0).unwrap() - 0.294).abs() < 5e-4);
        assert!(scaled_score(1.0, 3.0, 3.0).is_err());
        // Negative returns (mountain car) scale the same way.
        assert!((scaled_score(-100.83, -200.0, -98.75).unwrap() - 0.979).abs() < 1e-3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut env = CartPole::new();
        let policy = random_policy(&env, 1);
        let a = sample_trajectories(&mut env, &policy, 3, 11, "p").unwrap().to_jsonl().unwrap();
        let b = sample_trajectories(&mut env, &policy, 3, 11, "p").unwrap().to_jsonl().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
        assert!(sample_trajectories(&mut env, &policy, 0, 11, "p").is_err());
    }

    #[test]
    fn mode_evaluation_on_deterministic_env_has_zero_std() {
        // The gridworld with no slip is deterministic given the start; pin
        // the start by making a 1x2 grid.
        let grid = GridConfig {
            width: 2,
            height: 1,
            slip: 0.0,
            ..GridConfig::default()
        };
        let mut env = make_env("gridworld", Some(&grid)).unwrap();
        let policy = random_policy(env.as_ref(), 2);
        let (_, std) = evaluate(env.as_mut(), &policy, 10, 3, ActionSelection::Mode).unwrap();
        assert_eq!(std, 0.0);
        assert!(evaluate(env.as_mut(), &policy, 0, 3, ActionSelection::Mode).is_err());
    }

    #[test]
    fn random_cartpole_policy_is_poor() {
        let mut env = CartPole::new();
        let policy = random_policy(&env, 3);
        let (mean, _) = evaluate(&mut env, &policy, DEFAULT_EVAL_EPISODES, 0, ActionSelection::Sample).unwrap();
        assert!(mean > 8.0 && mean < 60.0, "{mean}");
    }
}
