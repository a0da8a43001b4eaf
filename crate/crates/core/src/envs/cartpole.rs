//! Cart-pole balancing (Barto, Sutton & Anderson, 1983).
//!
//! Dynamics, Euler step `tau = 0.02 s`:
//!
//! ```text
//! temp      = (F + m_p l thdot^2 sin th) / (m_c + m_p)
//! th_acc    = (g sin th - cos th * temp) / (l (4/3 - m_p cos^2 th / (m_c + m_p)))
//! x_acc     = temp - m_p l th_acc cos th / (m_c + m_p)
//! ```
//!
//! with `g = 9.8`, `m_c = 1.0`, `m_p = 0.1`, half-length `l = 0.5`,
//! `|F| = 10`. Action 0 pushes left, 1 pushes right. The start state is
//! uniform on `[-0.05, 0.05]^4`. The episode terminates when `|x| > 2.4` or
//! `|th| > 12 deg`, and is capped at 200 steps. Every step costs -1
//! (reward +1), including the terminating one, so returns lie in `[1, 200]`.

use rand::Rng;

use super::{Action, ActionSpace, Env, EnvSpec, EnvState, Step};
use crate::error::Result;

pub const GRAVITY: f64 = 9.8;
pub const MASS_CART: f64 = 1.0;
pub const MASS_POLE: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_THRESHOLD: f64 = 2.4;
pub const HORIZON: usize = 200;

#[derive(Debug, Clone)]
pub struct CartPole {
    spec: EnvSpec,
    state: EnvState,
}

impl CartPole {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec::new("cartpole", 4, ActionSpace::Discrete(2), HORIZON).with_bounds(vec![
                (-X_THRESHOLD, X_THRESHOLD),
                (-3.0, 3.0),
                (-THETA_THRESHOLD, THETA_THRESHOLD),
                (-3.5, 3.5),
            ]),
            state: EnvState::new(),
        }
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.state.begin(seed);
        let rng = &mut self.state.rng;
        let obs: Vec<f64> = (0..4).map(|_| rng.random_range(-0.05..0.05)).collect();
        self.state.observation = obs.clone();
        obs
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.state.check_step(&self.spec, action)?;
        let force = if action.as_discrete() == Some(1) { FORCE_MAG } else { -FORCE_MAG };
        let [x, x_dot, theta, theta_dot] = <[f64; 4]>::try_from(self.state.observation.as_slice())
            .expect("cartpole observation has 4 components");

        let total_mass = MASS_CART + MASS_POLE;
        let pole_mass_length = MASS_POLE * HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc =
            (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        let x = x + TAU * x_dot;
        let x_dot = x_dot + TAU * x_acc;
        let theta = theta + TAU * theta_dot;
        let theta_dot = theta_dot + TAU * theta_acc;

        let terminated = x.abs() > X_THRESHOLD || theta.abs() > THETA_THRESHOLD;
        Ok(self.state.finish(&self.spec, vec![x, x_dot, theta, theta_dot], -1.0, terminated))
    }

    fn state(&self) -> &EnvState {
        &self.state
    }
}
