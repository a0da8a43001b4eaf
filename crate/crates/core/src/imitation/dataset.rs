//! Expert demonstrations, stored as JSON lines with one trajectory per line:
//! `{"observations": [[..], ..], "actions": [..], "costs": [..], "seed": u64}`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{Action, EnvSpec};
use crate::error::{Error, Result};
use crate::policy_opt::RolloutBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub costs: Vec<f64>,
    /// Environment reset seed of the episode.
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Undiscounted return in reward units (`-sum of costs`).
    pub fn reward_return(&self) -> f64 {
        -self.costs.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    pub trajectories: Vec<Trajectory>,
    /// Identifier of the policy that produced the data (usually a file path).
    pub source: String,
    /// Base sampling seed, when known.
    pub seed: Option<u64>,
}

impl ExpertDataset {
    pub fn new(trajectories: Vec<Trajectory>, source: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        let ds = Self {
            trajectories,
            source: source.into(),
            seed,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let first = self.trajectories.first().ok_or(Error::Empty("expert dataset"))?;
        let obs_dim = first.observations.first().map(|o| o.len()).ok_or(Error::Empty("expert trajectory"))?;
        for (k, t) in self.trajectories.iter().enumerate() {
            if t.is_empty() || t.observations.len() != t.len() || t.costs.len() != t.len() {
                return Err(Error::Config(format!(
                    "trajectory {k}: {} observations, {} actions, {} costs",
                    t.observations.len(),
                    t.actions.len(),
                    t.costs.len()
                )));
            }
            if t.observations.iter().any(|o| o.len() != obs_dim || o.iter().any(|x| !x.is_finite())) {
                return Err(Error::Config(format!("trajectory {k}: observations must be finite with dimension {obs_dim}")));
            }
            let kinds_match = t.actions.iter().all(|a| std::mem::discriminant(a) == std::mem::discriminant(&first.actions[0]));
            if !kinds_match {
                return Err(Error::Config(format!("trajectory {k}: mixed discrete and continuous actions")));
            }
        }
        Ok(())
    }

    /// Checks dimensions and actions against an environment.
    pub fn check_spec(&self, spec: &EnvSpec) -> Result<()> {
        if self.obs_dim() != spec.obs_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("observation dimension {}", spec.obs_dim),
                actual: self.obs_dim().to_string(),
            });
        }
        for t in &self.trajectories {
            if let Some(a) = t.actions.iter().find(|a| !spec.action_space.contains(a)) {
                return Err(Error::InvalidAction(format!("{a:?} not in {:?}", spec.action_space)));
            }
        }
        Ok(())
    }

    /// Converts every episode of a batch into a trajectory.
    pub fn from_batch(batch: &RolloutBatch, source: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        let trajectories = batch
            .episodes
            .iter()
            .map(|e| Trajectory {
                observations: (e.start..e.start + e.len).map(|i| batch.obs(i).to_vec()).collect(),
                actions: batch.actions[e.start..e.start + e.len].to_vec(),
                costs: batch.costs[e.start..e.start + e.len].to_vec(),
                seed: e.seed,
            })
            .collect();
        Self::new(trajectories, source, seed)
    }

    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn obs_dim(&self) -> usize {
        self.trajectories[0].observations[0].len()
    }

    /// All `(observation, action)` pairs in order.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &Action)> {
        self.trajectories.iter().flat_map(|t| t.observations.iter().map(|o| o.as_slice()).zip(&t.actions))
    }

    /// The first `n` trajectories.
    pub fn take(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_trajectories() {
            return Err(Error::Config(format!("cannot take {n} of {} trajectories", self.n_trajectories())));
        }
        Self::new(self.trajectories[..n].to_vec(), self.source.clone(), self.seed)
    }

    /// Mean and (population) standard deviation of reward-unit returns.
    pub fn return_stats(&self) -> (f64, f64) {
        mean_std(&self.trajectories.iter().map(|t| t.reward_return()).collect::<Vec<_>>())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.trajectories {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str, source: impl Into<String>) -> Result<Self> {
        let trajectories = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<Trajectory>, _>>()?;
        Self::new(trajectories, source, None)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl()?.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut trajectories = Vec::new();
        for line in f.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                trajectories.push(serde_json::from_str(&line)?);
            }
        }
        Self::new(trajectories, path.display().to_string(), None)
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
