//! Slippery gridworld with an absorbing goal.
//!
//! Cell `(x, y)` has state index `y * width + x`; `y = 0` is the top row.
//! The intended move succeeds with probability `1 - slip`, and `slip` is split
//! evenly between the two perpendicular moves. Moves into a wall leave the
//! agent in place. The goal is absorbing with cost 0; every other
//! state-action pair costs 1. Episodes start uniformly on the non-goal cells.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Action, ActionSpace, Env, EnvSpec, EnvState, Step};
use crate::error::{Error, Result};
use crate::mdp::{SaTable, TabularMdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Right, GridAction::Down, GridAction::Left];

    fn perpendicular(self) -> [GridAction; 2] {
        match self {
            GridAction::Up | GridAction::Down => [GridAction::Left, GridAction::Right],
            GridAction::Left | GridAction::Right => [GridAction::Up, GridAction::Down],
        }
    }

    fn apply(self, x: usize, y: usize, width: usize, height: usize) -> (usize, usize) {
        match self {
            GridAction::Up => (x, y.saturating_sub(1)),
            GridAction::Down => (x, (y + 1).min(height - 1)),
            GridAction::Left => (x.saturating_sub(1), y),
            GridAction::Right => ((x + 1).min(width - 1), y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    /// Goal cell `(x, y)`; the bottom-right corner when absent.
    pub goal: Option<(usize, usize)>,
    pub slip: f64,
    pub discount: f64,
    /// Episode cap for the sampled environment.
    pub horizon: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            goal: None,
            slip: 0.1,
            discount: 0.95,
            horizon: 100,
        }
    }
}

impl GridConfig {
    pub fn goal_cell(&self) -> (usize, usize) {
        self.goal.unwrap_or((self.width.saturating_sub(1), self.height.saturating_sub(1)))
    }

    pub fn goal_state(&self) -> usize {
        let (gx, gy) = self.goal_cell();
        gy * self.width + gx
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }
}

/// Exact tabular model of the gridworld: `S = width * height`, `A = 4`.
pub fn tabularize(config: &GridConfig) -> Result<TabularMdp> {
    let (w, h) = (config.width, config.height);
    if w == 0 || h == 0 {
        return Err(Error::Config("grid must be at least 1x1".into()));
    }
    let (gx, gy) = config.goal_cell();
    if gx >= w || gy >= h {
        return Err(Error::Config(format!("goal cell ({gx}, {gy}) outside {w}x{h} grid")));
    }
    if !(0.0..=1.0).contains(&config.slip) {
        return Err(Error::Config(format!("slip {} not in [0, 1]", config.slip)));
    }
    let n = w * h;
    let goal = config.goal_state();
    let mut transition = vec![0.0; n * 4 * n];
    for s in 0..n {
        let (x, y) = (s % w, s / w);
        for action in GridAction::ALL {
            let row = &mut transition[(s * 4 + action as usize) * n..][..n];
            if s == goal {
                row[s] = 1.0;
                continue;
            }
            let mut add = |a: GridAction, p: f64| {
                let (nx, ny) = a.apply(x, y, w, h);
                row[ny * w + nx] += p;
            };
            add(action, 1.0 - config.slip);
            for perp in action.perpendicular() {
                add(perp, config.slip / 2.0);
            }
        }
    }
    let start_dist: Vec<f64> = if n == 1 {
        vec![1.0]
    } else {
        (0..n).map(|s| if s == goal { 0.0 } else { 1.0 / (n - 1) as f64 }).collect()
    };
    let cost = SaTable::from_fn(n, 4, |s, _| if s == goal { 0.0 } else { 1.0 });
    TabularMdp::new(n, 4, transition, start_dist, config.discount, Some(cost))
}

/// Sampled gridworld with one-hot observations.
#[derive(Debug, Clone)]
pub struct GridWorld {
    config: GridConfig,
    mdp: TabularMdp,
    spec: EnvSpec,
    state: EnvState,
    cell: usize,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self> {
        let mdp = tabularize(&config)?;
        let spec = EnvSpec::new("gridworld", mdp.n_states(), ActionSpace::Discrete(4), config.horizon.max(1));
        Ok(Self {
            config,
            mdp,
            spec,
            state: EnvState::new(),
            cell: 0,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Current cell index.
    pub fn cell(&self) -> usize {
        self.cell
    }

    fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.mdp.n_states()];
        v[s] = 1.0;
        v
    }
}

pub(crate) fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

impl Env for GridWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.state.begin(seed);
        let u: f64 = self.state.rng.random();
        self.cell = sample_index(self.mdp.start_dist(), u);
        let obs = self.one_hot(self.cell);
        self.state.observation = obs.clone();
        obs
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.state.check_step(&self.spec, action)?;
        let a = action.as_discrete().expect("checked discrete");
        let cost = self.mdp.true_cost().map_or(1.0, |c| c.get(self.cell, a));
        let u: f64 = self.state.rng.random();
        self.cell = sample_index(self.mdp.next_dist(self.cell, a), u);
        let terminated = self.cell == self.config.goal_state();
        let obs = self.one_hot(self.cell);
        Ok(self.state.finish(&self.spec, obs, cost, terminated))
    }

    fn state(&self) -> &EnvState {
        &self.state
    }
}
