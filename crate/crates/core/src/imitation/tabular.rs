//! Exact GAIL on a tabular MDP: the discriminator is the closed-form optimum
//! `D* = rho_pi / (rho_pi + rho_E)` and the policy step is an entropy-
//! regularized best response to the cost `log D*`, damped by a causal KL
//! term towards the previous policy:
//!
//! ```text
//! pi_{k+1} = argmin_pi E_pi[log D*_k] - lambda H(pi) + beta E_pi[log pi - log pi_k]
//!          = RL((log D*_k - beta log pi_k) / (lambda + beta))
//! ```
//!
//! `beta = 0` is the undamped best response, which can cycle.

use serde::{Deserialize, Serialize};

use super::discriminator::EPS;
use crate::error::{Error, Result};
use crate::mdp::{occupancy_measure, OccupancyMeasure, SaTable, TabularMdp, TabularPolicy};
use crate::regularizers::{jsd_occupancy, optimal_discriminator};
use crate::soft_rl::{soft_value_iteration_from, DEFAULT_MAX_ITERS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularGailConfig {
    pub iters: usize,
    /// Causal entropy weight.
    pub lambda: f64,
    /// Weight of the KL pull towards the previous policy.
    pub prox: f64,
    pub soft_tol: f64,
    /// Starting policy; uniform when absent.
    #[serde(skip)]
    pub init: Option<TabularPolicy>,
}

impl Default for TabularGailConfig {
    fn default() -> Self {
        Self {
            iters: 200,
            lambda: 0.0,
            prox: 1.0,
            soft_tol: 1e-10,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularGailOutcome {
    pub policy: TabularPolicy,
    /// `JSD(rho_pi, rho_E)` before the first step and after each step.
    pub jsd_history: Vec<f64>,
}

pub fn tabular_gail_oracle(mdp: &TabularMdp, rho_e: &OccupancyMeasure, iters: usize) -> Result<TabularGailOutcome> {
    tabular_gail_oracle_with(mdp, rho_e, &TabularGailConfig { iters, ..TabularGailConfig::default() })
}

pub fn tabular_gail_oracle_with(mdp: &TabularMdp, rho_e: &OccupancyMeasure, cfg: &TabularGailConfig) -> Result<TabularGailOutcome> {
    rho_e.validate_for(mdp)?;
    if !(cfg.lambda >= 0.0 && cfg.prox >= 0.0 && cfg.lambda + cfg.prox > 0.0) {
        return Err(Error::Config(format!(
            "need lambda >= 0, prox >= 0 and lambda + prox > 0, got {} and {}",
            cfg.lambda, cfg.prox
        )));
    }
    let (n, k) = (mdp.n_states(), mdp.n_actions());
    let mut policy = cfg.init.clone().unwrap_or_else(|| TabularPolicy::uniform(n, k));
    if policy.n_states() != n || policy.n_actions() != k {
        return Err(Error::ShapeMismatch {
            expected: format!("[{n}][{k}]"),
            actual: format!("[{}][{}]", policy.n_states(), policy.n_actions()),
        });
    }
    let mut rho = occupancy_measure(mdp, &policy)?;
    let mut history = vec![jsd_occupancy(&rho, rho_e)?];
    let mut v: Option<Vec<f64>> = None;
    let scale = 1.0 / (cfg.lambda + cfg.prox);
    for _ in 0..cfg.iters {
        let d = optimal_discriminator(&rho, rho_e)?;
        let cost = SaTable::from_fn(n, k, |s, a| {
            let log_d = d.get(s, a).clamp(EPS, 1.0 - EPS).ln();
            let log_pi = policy.prob(s, a).max(f64::MIN_POSITIVE).ln();
            scale * (log_d - cfg.prox * log_pi)
        });
        let sol = soft_value_iteration_from(mdp, &cost, v.as_deref(), cfg.soft_tol, DEFAULT_MAX_ITERS)?;
        v = Some(sol.v_values);
        policy = sol.policy;
        rho = occupancy_measure(mdp, &policy)?;
        history.push(jsd_occupancy(&rho, rho_e)?);
    }
    Ok(TabularGailOutcome {
        policy,
        jsd_history: history,
    })
}
