//! Sampled-regime policy optimization: MLP policies, rollouts, score-function
//! gradients, advantage estimation, value baselines and the TRPO step.

pub mod adam;
pub mod gradients;
pub mod learner;
pub mod mlp;
pub mod policy;
pub mod rollout;
pub mod trpo;
pub mod value;

pub use adam::Adam;
pub use gradients::{
    discounted_to_go, discounted_weights, entropy_gradient, gae_advantages, policy_gradient, q_log, weighted_score,
};
pub use learner::{LearnerConfig, PolicyLearner};
pub use mlp::{mlp_forward, mlp_param_grad, Cache, Mlp};
pub use policy::{Dist, Policy, PolicyArch};
pub use rollout::{collect_rollouts, episode_seed, run_episode, ActionSelection, EnvFactory, Episode, RolloutBatch};
pub use trpo::{natural_gradient_direction, trpo_step, trpo_step_with_grad, FisherOperator, TrpoConfig, TrpoStats};
pub use value::{fit_value_fn, FitReport, ValueConfig, ValueFn};
