//! Mountain car (Moore, 1990).
//!
//! ```text
//! v' = clip(v + (a - 1) * 0.001 - 0.0025 cos(3x), -0.07, 0.07)
//! x' = clip(x + v', -1.2, 0.6);  v' = 0 if x' hits the left wall
//! ```
//!
//! Actions 0/1/2 push left, coast, push right. The start position is uniform on
//! `[-0.6, -0.4]` with zero velocity. The episode terminates only when
//! `x' >= 0.5` and is capped at 200 steps. Every step costs +1 (reward -1),
//! so returns lie in `[-200, -1]`.

use rand::Rng;

use super::{Action, ActionSpace, Env, EnvSpec, EnvState, Step};
use crate::error::Result;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const START_LOW: f64 = -0.6;
pub const START_HIGH: f64 = -0.4;
pub const HORIZON: usize = 200;

#[derive(Debug, Clone)]
pub struct MountainCar {
    spec: EnvSpec,
    state: EnvState,
}

impl MountainCar {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec::new("mountaincar", 2, ActionSpace::Discrete(3), HORIZON)
                .with_bounds(vec![(MIN_POSITION, MAX_POSITION), (-MAX_SPEED, MAX_SPEED)]),
            state: EnvState::new(),
        }
    }

    /// Mechanical energy per unit mass, `v^2/2 + (g/3) sin(3x)`.
    pub fn energy(observation: &[f64]) -> f64 {
        let (x, v) = (observation[0], observation[1]);
        0.5 * v * v + GRAVITY / 3.0 * (3.0 * x).sin()
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.state.begin(seed);
        let x = self.state.rng.random_range(START_LOW..START_HIGH);
        let obs = vec![x, 0.0];
        self.state.observation = obs.clone();
        obs
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.state.check_step(&self.spec, action)?;
        let a = action.as_discrete().expect("checked discrete") as f64;
        let (x, v) = (self.state.observation[0], self.state.observation[1]);
        let mut v = (v + (a - 1.0) * FORCE - GRAVITY * (3.0 * x).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let x = (x + v).clamp(MIN_POSITION, MAX_POSITION);
        if x <= MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        let terminated = x >= GOAL_POSITION;
        Ok(self.state.finish(&self.spec, vec![x, v], 1.0, terminated))
    }

    fn state(&self) -> &EnvState {
        &self.state
    }
}
