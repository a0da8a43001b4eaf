//! Any [`TabularMdp`] with a true cost, run as an episodic environment with
//! one-hot observations. Episodes never terminate; only the horizon cap ends
//! them, so discounted returns approximate the infinite-horizon values up to
//! `gamma^horizon`.

use rand::Rng;

use super::gridworld::sample_index;
use super::{Action, ActionSpace, Env, EnvSpec, EnvState, Step};
use crate::error::{Error, Result};
use crate::mdp::{SaTable, TabularMdp};

pub struct TabularEnv {
    mdp: TabularMdp,
    cost: SaTable,
    spec: EnvSpec,
    state: EnvState,
    s: usize,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp, horizon: usize) -> Result<Self> {
        let cost = mdp.true_cost().cloned().ok_or_else(|| Error::InvalidMdp("tabular env needs a true cost".into()))?;
        if mdp.n_actions() < 2 || horizon == 0 {
            return Err(Error::Config("tabular env needs >= 2 actions and a positive horizon".into()));
        }
        let spec = EnvSpec::new("tabular", mdp.n_states(), ActionSpace::Discrete(mdp.n_actions()), horizon);
        Ok(Self {
            mdp,
            cost,
            spec,
            state: EnvState::new(),
            s: 0,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.mdp.n_states()];
        v[self.s] = 1.0;
        v
    }
}

impl Env for TabularEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.state.begin(seed);
        let u: f64 = self.state.rng.random();
        self.s = sample_index(self.mdp.start_dist(), u);
        let obs = self.one_hot();
        self.state.observation = obs.clone();
        obs
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.state.check_step(&self.spec, action)?;
        let a = action.as_discrete().expect("checked discrete");
        let cost = self.cost.get(self.s, a);
        let u: f64 = self.state.rng.random();
        self.s = sample_index(self.mdp.next_dist(self.s, a), u);
        let obs = self.one_hot();
        Ok(self.state.finish(&self.spec, obs, cost, false))
    }

    fn state(&self) -> &EnvState {
        &self.state
    }
}
