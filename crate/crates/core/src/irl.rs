//! Max-causal-entropy IRL as dual ascent on the cost, and the RL-after-IRL
//! pipeline that recovers the expert's occupancy measure.
//!
//! With `Lbar(rho, c) = -Hbar(rho) - psi(c) + sum (rho - rho_E) c`, the inner
//! minimization over `rho` is solved exactly by soft value iteration and the
//! cost takes a subgradient step `c <- c + eta (rho_pi(c) - rho_E - dpsi(c))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    causal_entropy_occupancy, occupancy_measure, OccupancyMeasure, SaTable, TabularMdp, TabularPolicy,
};
use crate::regularizers::Regularizer;
use crate::soft_rl::{soft_value_iteration_from, DEFAULT_MAX_ITERS};

pub const DEFAULT_ITERS: usize = 5000;
/// Additive smoothing applied to empirical expert occupancies.
pub const EMPIRICAL_SMOOTHING: f64 = 1e-8;
/// Divergence is declared when the gap exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Costs are kept this far inside a regularizer's open upper bound.
const DOMAIN_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualState {
    pub cost: SaTable,
    pub iterate: usize,
    /// `||rho_pi(c) - rho_E||_1` for the returned cost.
    pub primal_gap: f64,
    pub history: Vec<(usize, f64)>,
    #[serde(skip)]
    pub policy: Option<TabularPolicy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualAscentConfig {
    /// `None` means `8 (1 - gamma)`.
    pub step_size: Option<f64>,
    pub iters: usize,
    /// Stop once the primal gap is at most this.
    pub gap_tol: f64,
    /// Tolerance of each inner soft value iteration.
    pub soft_tol: f64,
}

impl Default for DualAscentConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            iters: DEFAULT_ITERS,
            gap_tol: 1e-6,
            soft_tol: 1e-11,
        }
    }
}

pub fn default_step_size(mdp: &TabularMdp) -> f64 {
    8.0 * (1.0 - mdp.discount())
}

struct Inner {
    policy: TabularPolicy,
    rho: OccupancyMeasure,
    v: Vec<f64>,
}

fn solve_inner(mdp: &TabularMdp, cost: &SaTable, warm: Option<&[f64]>, tol: f64) -> Result<Inner> {
    let sol = soft_value_iteration_from(mdp, cost, warm, tol, DEFAULT_MAX_ITERS)?;
    let rho = occupancy_measure(mdp, &sol.policy)?;
    Ok(Inner {
        policy: sol.policy,
        rho,
        v: sol.v_values,
    })
}

/// Dual ascent with a fixed step size and iteration budget.
pub fn irl_dual_ascent(
    mdp: &TabularMdp,
    rho_e: &OccupancyMeasure,
    psi: &Regularizer,
    step_size: f64,
    iters: usize,
) -> Result<DualState> {
    let cfg = DualAscentConfig {
        step_size: Some(step_size),
        iters,
        ..DualAscentConfig::default()
    };
    irl_dual_ascent_with(mdp, rho_e, psi, &cfg)
}

/// Dual ascent from `c = 0` (or the largest admissible cost below the
/// regularizer's domain bound). `iters` counts cost updates; the returned
/// state describes the final cost.
pub fn irl_dual_ascent_with(
    mdp: &TabularMdp,
    rho_e: &OccupancyMeasure,
    psi: &Regularizer,
    cfg: &DualAscentConfig,
) -> Result<DualState> {
    rho_e.validate_for(mdp)?;
    let eta = cfg.step_size.unwrap_or_else(|| default_step_size(mdp));
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("step size must be finite and non-negative, got {eta}")));
    }
    let bound = psi.cost_upper_bound().map(|b| b - DOMAIN_MARGIN);
    let clamp = |x: f64| bound.map_or(x, |b| x.min(b));
    let mut cost = SaTable::zeros(mdp.n_states(), mdp.n_actions()).map(clamp);
    let mut inner = solve_inner(mdp, &cost, None, cfg.soft_tol)?;
    let mut gap = inner.rho.l1_distance(rho_e);
    let initial = gap;
    let mut history = vec![(0, gap)];
    let mut iterate = 0;
    while iterate < cfg.iters && gap > cfg.gap_tol {
        let sub = psi.subgradient(&cost)?;
        let grad = inner.rho.table().axpy(-1.0, rho_e.table()).axpy(-1.0, &sub);
        cost = cost.axpy(eta, &grad).map(clamp);
        inner = solve_inner(mdp, &cost, Some(&inner.v), cfg.soft_tol)?;
        gap = inner.rho.l1_distance(rho_e);
        iterate += 1;
        history.push((iterate, gap));
        if !gap.is_finite() || gap > DIVERGENCE_FACTOR * initial.max(cfg.gap_tol) {
            return Err(Error::Divergence {
                iterate,
                gap,
                initial,
                history,
            });
        }
    }
    Ok(DualState {
        cost,
        iterate,
        primal_gap: gap,
        history,
        policy: Some(inner.policy),
    })
}

/// `RL(IRL(rho_E))` with a constant regularizer. Fails unless the recovered
/// occupancy is within `1e-3 / (1 - gamma)` of the expert's in L1.
pub fn rl_after_irl(mdp: &TabularMdp, rho_e: &OccupancyMeasure) -> Result<TabularPolicy> {
    let (policy, _) = rl_after_irl_with(mdp, rho_e, &DualAscentConfig::default())?;
    Ok(policy)
}

pub fn rl_after_irl_with(
    mdp: &TabularMdp,
    rho_e: &OccupancyMeasure,
    cfg: &DualAscentConfig,
) -> Result<(TabularPolicy, DualState)> {
    let state = irl_dual_ascent_with(mdp, rho_e, &Regularizer::Constant(0.0), cfg)?;
    let tol = 1e-3 * mdp.total_mass();
    if state.primal_gap > tol {
        return Err(Error::NonConvergence {
            iters: state.iterate,
            residual: state.primal_gap,
        });
    }
    let policy = state.policy.clone().expect("dual ascent returns its policy");
    Ok((policy, state))
}

/// Discounted empirical occupancy from `(state, action)` trajectories,
/// averaged over trajectories, smoothed by `smoothing` per pair and rescaled
/// to total mass `1 / (1 - gamma)`.
pub fn empirical_occupancy(mdp: &TabularMdp, trajectories: &[Vec<(usize, usize)>], smoothing: f64) -> Result<OccupancyMeasure> {
    if trajectories.is_empty() {
        return Err(Error::Empty("trajectories"));
    }
    let gamma = mdp.discount();
    let mut counts = SaTable::filled(mdp.n_states(), mdp.n_actions(), smoothing);
    for traj in trajectories {
        let mut w = 1.0 / trajectories.len() as f64;
        for &(s, a) in traj {
            if s >= mdp.n_states() || a >= mdp.n_actions() {
                return Err(Error::InvalidAction(format!("pair ({s}, {a}) outside the MDP")));
            }
            counts.set(s, a, counts.get(s, a) + w);
            w *= gamma;
        }
    }
    let total = counts.sum();
    if !(total > 0.0) {
        return Err(Error::Empty("trajectory pairs"));
    }
    OccupancyMeasure::from_table(counts.map(|x| x * mdp.total_mass() / total))
}

/// `Lbar(rho, c) = -Hbar(rho) - psi(c) + sum (rho - rho_E) c`.
pub fn lagrangian(rho: &OccupancyMeasure, cost: &SaTable, rho_e: &OccupancyMeasure, psi: &Regularizer) -> Result<f64> {
    rho.table().check_shape(cost)?;
    rho.table().check_shape(rho_e.table())?;
    let pair = rho.table().axpy(-1.0, rho_e.table()).dot(cost);
    Ok(-causal_entropy_occupancy(rho) - psi.eval(cost)? + pair)
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    /// `max (Lbar(rho_A, c) - Lbar(rho_A, c_tilde))^+` over cost probes.
    pub cost_violation: f64,
    /// `max (Lbar(rho_A, c_tilde) - Lbar(rho, c_tilde))^+` over measure probes.
    pub measure_violation: f64,
    pub max_violation: f64,
    /// Largest flow-constraint residual among the measure probes.
    pub max_probe_residual: f64,
    pub probes: usize,
}

/// Probes the saddle inequalities `Lbar(rho_A, c) <= Lbar(rho_A, c~) <= Lbar(rho, c~)`.
///
/// Cost probes are `c~ + u` with `u` uniform in `[-1, 1]` per entry. Measure
/// probes are occupancies of random policies, half of them drawn fresh and
/// half mixed with `policy_from_occupancy(rho_A)` at a random weight, so every
/// probe is feasible by construction.
pub fn saddle_check(
    mdp: &TabularMdp,
    rho_a: &OccupancyMeasure,
    c_tilde: &SaTable,
    rho_e: &OccupancyMeasure,
    psi: &Regularizer,
    n_probes: usize,
    seed: u64,
) -> Result<SaddleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = lagrangian(rho_a, c_tilde, rho_e, psi)?;
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let pi_a = crate::mdp::policy_from_occupancy(rho_a)?;
    let mut report = SaddleReport {
        cost_violation: 0.0,
        measure_violation: 0.0,
        max_violation: 0.0,
        max_probe_residual: 0.0,
        probes: n_probes,
    };
    for k in 0..n_probes {
        let c = SaTable::from_fn(n_s, n_a, |s, a| c_tilde.get(s, a) + rng.random_range(-1.0..=1.0));
        let v = lagrangian(rho_a, &c, rho_e, psi)?;
        if v.is_finite() {
            report.cost_violation = report.cost_violation.max(v - center);
        }

        let raw = SaTable::from_fn(n_s, n_a, |_, _| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln());
        let mut pi = TabularPolicy::from_unnormalized(raw);
        if k % 2 == 1 {
            let t: f64 = rng.random();
            let mixed = pi.probs().map(|x| t * x).axpy(1.0 - t, pi_a.probs());
            pi = TabularPolicy::from_unnormalized(mixed);
        }
        let rho = occupancy_measure(mdp, &pi)?;
        report.max_probe_residual = report.max_probe_residual.max(rho.flow_residual(mdp)?);
        report.measure_violation = report.measure_violation.max(center - lagrangian(&rho, c_tilde, rho_e, psi)?);
    }
    report.max_violation = report.cost_violation.max(report.measure_violation);
    Ok(report)
}
