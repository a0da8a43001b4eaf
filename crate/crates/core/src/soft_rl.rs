//! Entropy-regularized optimal control on tabular MDPs.
//!
//! [`soft_value_iteration`] returns `argmin_pi -H(pi) + E_pi[c]` by iterating
//! the soft Bellman backup
//!
//! ```text
//! Q(s,a) = c(s,a) + gamma sum_s' P(s'|s,a) V(s')
//! V(s)   = -log sum_a exp(-Q(s,a))
//! ```
//!
//! which is a gamma-contraction in the sup norm.

use crate::error::{Error, Result};
use crate::mdp::{causal_entropy_policy, occupancy_measure, SaTable, TabularMdp, TabularPolicy};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct SoftSolution {
    pub q_values: SaTable,
    pub v_values: Vec<f64>,
    /// `pi(a|s) = exp(V(s) - Q(s,a))`.
    pub policy: TabularPolicy,
    /// Sup-norm change of `V` in the final sweep.
    pub residual: f64,
    pub iterations: usize,
}

impl SoftSolution {
    /// `sum_s p0(s) V(s)`, the optimal value of `-H(pi) + E_pi[c]`.
    pub fn start_value(&self, mdp: &TabularMdp) -> f64 {
        mdp.start_dist().iter().zip(&self.v_values).map(|(p, v)| p * v).sum()
    }
}

/// Sparse view of the kernel, `(s', p)` pairs per `(s, a)`.
pub(crate) struct SparseKernel {
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl SparseKernel {
    pub(crate) fn new(mdp: &TabularMdp) -> Self {
        let mut offsets = Vec::with_capacity(mdp.n_states() * mdp.n_actions() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                entries.extend(mdp.next_dist(s, a).iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, p)| (i, *p)));
                offsets.push(entries.len());
            }
        }
        Self { offsets, entries }
    }

    #[inline]
    pub(crate) fn expect(&self, idx: usize, v: &[f64]) -> f64 {
        self.entries[self.offsets[idx]..self.offsets[idx + 1]].iter().map(|&(sp, p)| p * v[sp]).sum()
    }
}

/// Soft minimum `-log sum exp(-q)`, computed with max-subtraction.
#[inline]
pub fn soft_min(q: &[f64]) -> f64 {
    let m = q.iter().cloned().fold(f64::INFINITY, f64::min);
    if m.is_infinite() {
        return m;
    }
    let s: f64 = q.iter().map(|&x| (m - x).exp()).sum();
    m - s.ln()
}

fn backup(mdp: &TabularMdp, kernel: &SparseKernel, cost: &SaTable, v: &[f64], q: &mut SaTable) {
    let gamma = mdp.discount();
    let n_actions = mdp.n_actions();
    for s in 0..mdp.n_states() {
        for a in 0..n_actions {
            q.set(s, a, cost.get(s, a) + gamma * kernel.expect(s * n_actions + a, v));
        }
    }
}

/// Solves `RL(c)` from `V = 0`. Stops when the sup-norm change of `V` is at
/// most `tol * max(1, |V|_inf)`.
pub fn soft_value_iteration(mdp: &TabularMdp, cost: &SaTable, tol: f64, max_iters: usize) -> Result<SoftSolution> {
    soft_value_iteration_from(mdp, cost, None, tol, max_iters)
}

/// Solves `RL(c)` starting from `init_v` (warm start for repeated solves).
pub fn soft_value_iteration_from(
    mdp: &TabularMdp,
    cost: &SaTable,
    init_v: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<SoftSolution> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    if cost.n_states() != mdp.n_states() || cost.n_actions() != mdp.n_actions() {
        return Err(Error::ShapeMismatch {
            expected: format!("[{}][{}]", mdp.n_states(), mdp.n_actions()),
            actual: format!("[{}][{}]", cost.n_states(), cost.n_actions()),
        });
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost table"));
    }
    let kernel = SparseKernel::new(mdp);
    let n = mdp.n_states();
    let mut v = match init_v {
        Some(v0) if v0.len() == n => v0.to_vec(),
        _ => vec![0.0; n],
    };
    let mut q = SaTable::zeros(n, mdp.n_actions());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut threshold = tol;
    while iterations < max_iters {
        backup(mdp, &kernel, cost, &v, &mut q);
        residual = 0.0;
        let mut scale: f64 = 1.0;
        for (s, vs) in v.iter_mut().enumerate() {
            let new = soft_min(q.row(s));
            residual = f64::max(residual, (new - *vs).abs());
            scale = scale.max(new.abs());
            *vs = new;
        }
        iterations += 1;
        // Relative once |V| > 1, so rounding in large values cannot stall it.
        threshold = tol * scale;
        if residual <= threshold {
            break;
        }
    }
    if residual > threshold {
        return Err(Error::NonConvergence { iters: iterations, residual });
    }
    // Final Q from the converged V, and V re-derived from Q so that the
    // returned triple is exactly softmax-consistent.
    backup(mdp, &kernel, cost, &v, &mut q);
    let v_values: Vec<f64> = (0..n).map(|s| soft_min(q.row(s))).collect();
    let probs = SaTable::from_fn(n, mdp.n_actions(), |s, a| (v_values[s] - q.get(s, a)).exp());
    Ok(SoftSolution {
        policy: TabularPolicy::from_unnormalized(probs),
        q_values: q,
        v_values,
        residual,
        iterations,
    })
}

/// `-H(pi) + E_pi[c]`, evaluated exactly through the occupancy measure.
pub fn exact_policy_objective(mdp: &TabularMdp, policy: &TabularPolicy, cost: &SaTable) -> Result<f64> {
    let rho = occupancy_measure(mdp, policy)?;
    let h = causal_entropy_policy(mdp, policy)?;
    Ok(-h + crate::mdp::expected_cost(&rho, cost)?)
}
