//! Occupancy-measure imitation learning: exact tabular IRL and RL, cost
//! regularizers and their conjugates, and sampled-regime imitation (GAIL,
//! feature-matching apprenticeship learning, behavioral cloning) on classic
//! control tasks.

pub mod envs;
pub mod error;
pub mod harness;
pub mod imitation;
pub mod irl;
pub mod mdp;
pub mod policy_opt;
pub mod regularizers;
pub mod scalar;
pub mod soft_rl;

pub use error::{Error, Result};
pub use mdp::{OccupancyMeasure, SaTable, TabularMdp, TabularPolicy};
