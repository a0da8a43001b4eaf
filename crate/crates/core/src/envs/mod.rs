//! In-repo environments.
//!
//! Costs follow `cost = -reward` everywhere. Every environment is fully
//! determined by the seed passed to [`Env::reset`] and the action sequence.

mod cartpole;
mod gridworld;
mod mountain_car;
mod tabular;

pub use cartpole::CartPole;
pub use gridworld::{tabularize, GridConfig, GridWorld, GridAction};
pub use mountain_car::MountainCar;
pub use tabular::TabularEnv;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

impl ActionSpace {
    /// Width of the action encoding (one-hot for discrete).
    pub fn encoding_dim(&self) -> usize {
        match *self {
            ActionSpace::Discrete(k) => k,
            ActionSpace::Continuous(d) => d,
        }
    }

    pub fn contains(&self, action: &Action) -> bool {
        match (self, action) {
            (ActionSpace::Discrete(k), Action::Discrete(a)) => a < k,
            (ActionSpace::Continuous(d), Action::Continuous(v)) => v.len() == *d && v.iter().all(|x| x.is_finite()),
            _ => false,
        }
    }
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub horizon_cap: usize,
    pub cost_convention: String,
    /// Nominal range of each observation component, used to scale inputs to
    /// `[-1, 1]`. Velocities are unbounded in principle and use typical ranges.
    pub obs_bounds: Vec<(f64, f64)>,
}

impl EnvSpec {
    pub(crate) fn new(name: &str, obs_dim: usize, action_space: ActionSpace, horizon_cap: usize) -> Self {
        assert!(horizon_cap >= 1);
        match action_space {
            ActionSpace::Discrete(k) => assert!(k >= 2),
            ActionSpace::Continuous(d) => assert!(d >= 1),
        }
        Self {
            name: name.to_string(),
            obs_dim,
            action_space,
            horizon_cap,
            cost_convention: "cost = -reward".to_string(),
            obs_bounds: vec![(0.0, 1.0); obs_dim],
        }
    }

    pub(crate) fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.obs_dim);
        assert!(bounds.iter().all(|(lo, hi)| lo < hi));
        self.obs_bounds = bounds;
        self
    }

    /// Affine map of `obs` onto `[-1, 1]` per component (not clamped).
    pub fn scale_observation(&self, obs: &[f64], out: &mut Vec<f64>) {
        out.extend(obs.iter().zip(&self.obs_bounds).map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// Writes the one-hot (discrete) or raw (continuous) encoding.
    pub fn encode_into(&self, space: ActionSpace, out: &mut Vec<f64>) {
        match (self, space) {
            (Action::Discrete(a), ActionSpace::Discrete(k)) => {
                out.extend((0..k).map(|i| if i == *a { 1.0 } else { 0.0 }));
            }
            (Action::Continuous(v), _) => out.extend_from_slice(v),
            (Action::Discrete(a), ActionSpace::Continuous(_)) => out.push(*a as f64),
        }
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub cost: f64,
    /// Episode over, either by termination or by the horizon cap.
    pub done: bool,
    /// Episode reached a terminal state (as opposed to hitting the horizon cap).
    pub terminated: bool,
}

/// Mutable per-episode state shared by the environments.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_count: usize,
    pub done: bool,
    pub rng: ChaCha8Rng,
}

impl EnvState {
    pub(crate) fn new() -> Self {
        Self {
            observation: Vec::new(),
            step_count: 0,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub(crate) fn begin(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.step_count = 0;
        self.done = false;
    }

    pub(crate) fn check_step(&self, spec: &EnvSpec, action: &Action) -> Result<()> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if !spec.action_space.contains(action) {
            return Err(Error::InvalidAction(format!("{action:?} not in {:?}", spec.action_space)));
        }
        Ok(())
    }

    /// Records a transition and returns the step, applying the horizon cap.
    pub(crate) fn finish(&mut self, spec: &EnvSpec, observation: Vec<f64>, cost: f64, terminated: bool) -> Step {
        self.step_count += 1;
        let done = terminated || self.step_count >= spec.horizon_cap;
        self.done = done;
        self.observation = observation.clone();
        Step {
            observation,
            cost,
            done,
            terminated,
        }
    }
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode; identical seeds give identical observations.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &Action) -> Result<Step>;

    fn state(&self) -> &EnvState;
}

/// Known environment names, as accepted by [`make_env`].
pub const ENV_NAMES: [&str; 3] = ["cartpole", "mountaincar", "gridworld"];

/// Canonical spelling of an environment name.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
        "cartpole" => Some("cartpole"),
        "mountaincar" => Some("mountaincar"),
        "gridworld" | "grid" => Some("gridworld"),
        _ => None,
    }
}

/// Constructs an environment by name. `grid` configures the gridworld and is
/// ignored otherwise.
pub fn make_env(name: &str, grid: Option<&GridConfig>) -> Result<Box<dyn Env>> {
    match canonical_name(name) {
        Some("cartpole") => Ok(Box::new(CartPole::new())),
        Some("mountaincar") => Ok(Box::new(MountainCar::new())),
        Some("gridworld") => Ok(Box::new(GridWorld::new(grid.cloned().unwrap_or_default())?)),
        _ => Err(Error::Config(format!("unknown environment {name:?}; expected one of {ENV_NAMES:?}"))),
    }
}
