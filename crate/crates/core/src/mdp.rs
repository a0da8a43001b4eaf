//! Finite MDPs, occupancy measures and causal entropy.
//!
//! Everything here is exact: occupancy measures come from a dense LU solve of
//! the discounted flow equations, never from rollouts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability inputs (rows of kernels and policies).
pub const INPUT_TOL: f64 = 1e-12;
/// Tolerance for quantities derived from a linear solve.
pub const DERIVED_TOL: f64 = 1e-9;

/// Dense real table indexed by `(state, action)`.
///
/// Serialized as a nested `[[f64; A]; S]` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SaTable {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl SaTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![value; n_states * n_actions],
        }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            data,
        }
    }

    /// Builds a table from row-major flat data.
    pub fn from_flat(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", n_states * n_actions),
                actual: format!("{} entries", data.len()),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            data,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of length {n_actions}"),
                actual: "ragged rows".into(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            data: rows.into_iter().flatten().collect(),
        })
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.data[s * self.n_actions + a] = value;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n_actions.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn same_shape(&self, other: &SaTable) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    pub(crate) fn check_shape(&self, other: &SaTable) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("[{}][{}]", self.n_states, self.n_actions),
                actual: format!("[{}][{}]", other.n_states, other.n_actions),
            })
        }
    }

    /// Elementwise `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &SaTable) -> SaTable {
        debug_assert!(self.same_shape(other));
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + scale * y).collect();
        SaTable { data, ..*self }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SaTable {
        SaTable {
            data: self.data.iter().map(|&x| f(x)).collect(),
            ..*self
        }
    }

    pub fn dot(&self, other: &SaTable) -> f64 {
        self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum()
    }

    pub fn l1_distance(&self, other: &SaTable) -> f64 {
        self.data.iter().zip(&other.data).map(|(x, y)| (x - y).abs()).sum()
    }

    pub fn max_abs_diff(&self, other: &SaTable) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SaTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SaTable::from_rows(rows)
    }
}

impl From<SaTable> for Vec<Vec<f64>> {
    fn from(t: SaTable) -> Self {
        t.rows()
    }
}

/// A finite discounted MDP with an optional true cost table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Flat `[s][a][s']` kernel.
    transition: Vec<f64>,
    start_dist: Vec<f64>,
    discount: f64,
    true_cost: Option<SaTable>,
}

/// On-disk JSON layout of a [`TabularMdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpDocument {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    start_dist: Vec<f64>,
    discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_cost: Option<Vec<Vec<f64>>>,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (s, a) = (doc.n_states, doc.n_actions);
        if doc.transition.len() != s || doc.transition.iter().any(|r| r.len() != a || r.iter().any(|p| p.len() != s)) {
            return Err(Error::InvalidMdp(format!("transition must have shape [{s}][{a}][{s}]")));
        }
        let transition = doc.transition.into_iter().flatten().flatten().collect();
        let true_cost = doc.true_cost.map(SaTable::from_rows).transpose()?;
        TabularMdp::new(s, a, transition, doc.start_dist, doc.discount, true_cost)
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(m: TabularMdp) -> Self {
        let (s, a) = (m.n_states, m.n_actions);
        let transition = (0..s)
            .map(|i| (0..a).map(|j| m.next_dist(i, j).to_vec()).collect())
            .collect();
        MdpDocument {
            n_states: s,
            n_actions: a,
            transition,
            start_dist: m.start_dist,
            discount: m.discount,
            true_cost: m.true_cost.map(|c| c.rows()),
        }
    }
}

impl TabularMdp {
    /// Builds and validates an MDP. `transition` is the flat `[s][a][s']` kernel.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        start_dist: Vec<f64>,
        discount: f64,
        true_cost: Option<SaTable>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidMdp(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if start_dist.len() != n_states {
            return Err(Error::InvalidMdp("start_dist length differs from n_states".into()));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidMdp(format!("discount {discount} not in (0,1)")));
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row).map_err(|e| {
                Error::InvalidMdp(format!("transition[{}][{}]: {e}", i / n_actions, i % n_actions))
            })?;
        }
        check_distribution(&start_dist).map_err(|e| Error::InvalidMdp(format!("start_dist: {e}")))?;
        if let Some(c) = &true_cost {
            if c.n_states() != n_states || c.n_actions() != n_actions {
                return Err(Error::InvalidMdp("true_cost shape differs from [S][A]".into()));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            start_dist,
            discount,
            true_cost,
        })
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    pub fn true_cost(&self) -> Option<&SaTable> {
        self.true_cost.as_ref()
    }

    /// `P(. | s, a)`.
    #[inline]
    pub fn next_dist(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    pub fn with_true_cost(mut self, cost: SaTable) -> Result<Self> {
        if cost.n_states() != self.n_states || cost.n_actions() != self.n_actions {
            return Err(Error::InvalidMdp("true_cost shape differs from [S][A]".into()));
        }
        self.true_cost = Some(cost);
        Ok(self)
    }

    /// Total discounted mass `1/(1-gamma)` of every occupancy measure.
    pub fn total_mass(&self) -> f64 {
        1.0 / (1.0 - self.discount)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check_table(&self, t: &SaTable) -> Result<()> {
        if t.n_states() != self.n_states || t.n_actions() != self.n_actions {
            return Err(Error::ShapeMismatch {
                expected: format!("[{}][{}]", self.n_states, self.n_actions),
                actual: format!("[{}][{}]", t.n_states(), t.n_actions()),
            });
        }
        Ok(())
    }
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(format!("entry {x} is negative or non-finite"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > INPUT_TOL {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

/// A stationary stochastic policy `pi(a|s)` on a finite MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SaTable", into = "SaTable")]
pub struct TabularPolicy {
    probs: SaTable,
}

impl TryFrom<SaTable> for TabularPolicy {
    type Error = Error;

    fn try_from(t: SaTable) -> Result<Self> {
        TabularPolicy::new(t)
    }
}

impl From<TabularPolicy> for SaTable {
    fn from(p: TabularPolicy) -> Self {
        p.probs
    }
}

impl TabularPolicy {
    pub fn new(probs: SaTable) -> Result<Self> {
        for s in 0..probs.n_states() {
            check_distribution(probs.row(s)).map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: SaTable::filled(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        Self {
            probs: SaTable::from_fn(actions.len(), n_actions, |s, a| if actions[s] == a { 1.0 } else { 0.0 }),
        }
    }

    /// Row-wise softmax of `logits`.
    pub fn softmax(logits: &SaTable) -> Self {
        let mut probs = logits.clone();
        for s in 0..probs.n_states() {
            let row = probs.row_mut(s);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            row.iter_mut().for_each(|x| *x /= z);
        }
        Self { probs }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs.get(s, a)
    }

    pub fn probs(&self) -> &SaTable {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.n_actions()
    }

    /// Renormalizes rows; for callers that assemble probabilities with
    /// floating-point drift (e.g. exponentiated log-policies).
    pub(crate) fn from_unnormalized(mut probs: SaTable) -> Self {
        for s in 0..probs.n_states() {
            let row = probs.row_mut(s);
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
        }
        Self { probs }
    }
}

/// Discounted state-action visitation `rho(s,a)`, total mass `1/(1-gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupancyMeasure {
    rho: SaTable,
}

impl OccupancyMeasure {
    /// Wraps a table, checking only non-negativity. Use
    /// [`OccupancyMeasure::validate_for`] to check membership in the feasible set.
    pub fn from_table(rho: SaTable) -> Result<Self> {
        if let Some(x) = rho.as_slice().iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!("entry {x} is negative or non-finite")));
        }
        Ok(Self { rho })
    }

    pub fn table(&self) -> &SaTable {
        &self.rho
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.rho.get(s, a)
    }

    pub fn n_states(&self) -> usize {
        self.rho.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.rho.n_actions()
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.sum()
    }

    pub fn state_mass(&self, s: usize) -> f64 {
        self.rho.row(s).iter().sum()
    }

    pub fn l1_distance(&self, other: &OccupancyMeasure) -> f64 {
        self.rho.l1_distance(&other.rho)
    }

    /// Convex combination `t * self + (1 - t) * other`.
    pub fn mix(&self, t: f64, other: &OccupancyMeasure) -> OccupancyMeasure {
        let rho = self.rho.map(|x| t * x).axpy(1.0 - t, &other.rho);
        OccupancyMeasure { rho }
    }

    /// Largest violation of the Bellman flow constraints
    /// `sum_a rho(s,a) = p0(s) + gamma sum_{s',a} P(s|s',a) rho(s',a)`.
    pub fn flow_residual(&self, mdp: &TabularMdp) -> Result<f64> {
        mdp.check_table(&self.rho)?;
        let n = mdp.n_states();
        let mut inflow = mdp.start_dist().to_vec();
        for sp in 0..n {
            for a in 0..mdp.n_actions() {
                let mass = self.rho.get(sp, a);
                if mass == 0.0 {
                    continue;
                }
                for (s, p) in mdp.next_dist(sp, a).iter().enumerate() {
                    inflow[s] += mdp.discount() * p * mass;
                }
            }
        }
        Ok((0..n).map(|s| (self.state_mass(s) - inflow[s]).abs()).fold(0.0, f64::max))
    }

    /// Checks mass and flow constraints for `mdp` at [`DERIVED_TOL`].
    pub fn validate_for(&self, mdp: &TabularMdp) -> Result<()> {
        let mass = self.total_mass();
        if (mass - mdp.total_mass()).abs() > DERIVED_TOL * mdp.total_mass().max(1.0) {
            return Err(Error::InvalidMeasure(format!(
                "total mass {mass} differs from 1/(1-gamma) = {}",
                mdp.total_mass()
            )));
        }
        let r = self.flow_residual(mdp)?;
        if r > DERIVED_TOL {
            return Err(Error::InvalidMeasure(format!("flow residual {r:e}")));
        }
        Ok(())
    }
}

/// Discounted state visitation `d = p0 + gamma P_pi^T d`, by dense LU.
pub fn state_visitation(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    if policy.n_states() != n || policy.n_actions() != mdp.n_actions() {
        return Err(Error::ShapeMismatch {
            expected: format!("policy [{}][{}]", n, mdp.n_actions()),
            actual: format!("[{}][{}]", policy.n_states(), policy.n_actions()),
        });
    }
    let gamma = mdp.discount();
    // A = I - gamma * P_pi^T, with P_pi[s][s'] = sum_a pi(a|s) P(s'|s,a).
    let mut a_mat = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for (sp, p) in mdp.next_dist(s, a).iter().enumerate() {
                a_mat[(sp, s)] -= gamma * pa * p;
            }
        }
    }
    let b = DVector::from_column_slice(mdp.start_dist());
    let d = a_mat
        .clone()
        .lu()
        .solve(&b)
        .ok_or(Error::SingularSystem { residual: f64::INFINITY })?;
    let residual = (&a_mat * &d - &b).amax();
    if !(residual <= 1e-8) {
        return Err(Error::SingularSystem { residual });
    }
    Ok(d.iter().copied().collect())
}

/// Exact occupancy measure `rho_pi(s,a) = pi(a|s) sum_t gamma^t P(s_t = s)`.
pub fn occupancy_measure(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<OccupancyMeasure> {
    let d = state_visitation(mdp, policy)?;
    let rho = SaTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| (d[s] * policy.prob(s, a)).max(0.0));
    Ok(OccupancyMeasure { rho })
}

/// The unique policy whose occupancy measure is `rho`. States with zero mass
/// are unreachable and get the uniform distribution.
pub fn policy_from_occupancy(rho: &OccupancyMeasure) -> Result<TabularPolicy> {
    let t = rho.table();
    if let Some(x) = t.as_slice().iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidMeasure(format!("negative entry {x}")));
    }
    let n_actions = t.n_actions();
    let mut probs = t.clone();
    for s in 0..t.n_states() {
        let mass: f64 = t.row(s).iter().sum();
        let row = probs.row_mut(s);
        if mass > 0.0 {
            row.iter_mut().for_each(|x| *x /= mass);
        } else {
            row.iter_mut().for_each(|x| *x = 1.0 / n_actions as f64);
        }
    }
    Ok(TabularPolicy { probs })
}

/// `E_pi[c] = sum_{s,a} rho(s,a) c(s,a)`.
pub fn expected_cost(rho: &OccupancyMeasure, cost: &SaTable) -> Result<f64> {
    rho.table().check_shape(cost)?;
    Ok(rho.table().dot(cost))
}

/// `x log x` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Discounted causal entropy `H(pi) = sum rho_pi(s,a) (-log pi(a|s))`.
pub fn causal_entropy_policy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let rho = occupancy_measure(mdp, policy)?;
    let mut h = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let p = policy.prob(s, a);
            if p > 0.0 {
                h -= rho.get(s, a) * p.ln();
            }
        }
    }
    Ok(h)
}

/// Causal entropy of an occupancy measure,
/// `-sum rho(s,a) log(rho(s,a) / sum_a' rho(s,a'))`.
pub fn causal_entropy_occupancy(rho: &OccupancyMeasure) -> f64 {
    let t = rho.table();
    let mut h = 0.0;
    for s in 0..t.n_states() {
        let mass: f64 = t.row(s).iter().sum();
        if mass <= 0.0 {
            continue;
        }
        for &x in t.row(s) {
            h -= xlogy(x, x / mass);
        }
    }
    h
}

/// `-H(rho) + sum (rho - rho_E) c`. Pass an all-zero `rho_e` for the
/// unshifted form `-H(rho) + sum rho c`.
pub fn lagrangian_value(rho: &OccupancyMeasure, cost: &SaTable, rho_e: &OccupancyMeasure) -> Result<f64> {
    rho.table().check_shape(cost)?;
    rho.table().check_shape(rho_e.table())?;
    let linear: f64 = rho
        .table()
        .as_slice()
        .iter()
        .zip(rho_e.table().as_slice())
        .zip(cost.as_slice())
        .map(|((r, re), c)| (r - re) * c)
        .sum();
    Ok(-causal_entropy_occupancy(rho) + linear)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// s0 <-> s1 via action 1 ("go"), self-loop via action 0 ("stay").
    pub(crate) fn chain(gamma: f64) -> TabularMdp {
        #[rustfmt::skip]
        let transition = vec![
            1.0, 0.0,   0.0, 1.0,
            0.0, 1.0,   1.0, 0.0,
        ];
        TabularMdp::new(2, 2, transition, vec![1.0, 0.0], gamma, None).unwrap()
    }

    /// Gaussian elimination with partial pivoting, independent of nalgebra.
    fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn chain_visitation_matches_independent_solver() {
        let mdp = chain(0.5);
        let pi = TabularPolicy::uniform(2, 2);
        // (I - gamma P_pi^T) d = p0 with P_pi = [[.5,.5],[.5,.5]].
        let a = vec![vec![1.0 - 0.25, -0.25], vec![-0.25, 1.0 - 0.25]];
        let d = solve_dense(a, vec![1.0, 0.0]);
        assert!((d[0] - 1.5).abs() < 1e-14 && (d[1] - 0.5).abs() < 1e-14);
        let rho = occupancy_measure(&mdp, &pi).unwrap();
        let expected = [[0.75, 0.75], [0.25, 0.25]];
        for s in 0..2 {
            for a in 0..2 {
                assert!((rho.get(s, a) - expected[s][a]).abs() < 1e-12);
            }
        }
        assert!(rho.flow_residual(&mdp).unwrap() < 1e-12);
    }

    #[test]
    fn single_state_single_action() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.5, None).unwrap();
        let rho = occupancy_measure(&mdp, &TabularPolicy::uniform(1, 1)).unwrap();
        assert!((rho.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mass_identity_and_expected_cost() {
        let mdp = chain(0.9);
        let rho = occupancy_measure(&mdp, &TabularPolicy::uniform(2, 2)).unwrap();
        assert!((rho.total_mass() - 10.0).abs() < 1e-9);
        assert!((expected_cost(&rho, &SaTable::filled(2, 2, 1.0)).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(expected_cost(&rho, &SaTable::zeros(2, 2)).unwrap(), 0.0);

        let rho = occupancy_measure(&chain(0.5), &TabularPolicy::uniform(2, 2)).unwrap();
        let c = SaTable::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!((expected_cost(&rho, &c).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(
            expected_cost(&rho, &SaTable::zeros(3, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn policy_from_chain_occupancy_is_uniform() {
        let rho = OccupancyMeasure::from_table(SaTable::from_rows(vec![vec![0.75, 0.75], vec![0.25, 0.25]]).unwrap())
            .unwrap();
        let pi = policy_from_occupancy(&rho).unwrap();
        assert_eq!(pi, TabularPolicy::uniform(2, 2));
    }

    #[test]
    fn policy_from_single_action_support_is_deterministic() {
        let rho = OccupancyMeasure::from_table(SaTable::from_rows(vec![vec![0.0, 1.5], vec![0.5, 0.0]]).unwrap())
            .unwrap();
        let pi = policy_from_occupancy(&rho).unwrap();
        assert_eq!(pi, TabularPolicy::deterministic(2, &[1, 0]));
    }

    #[test]
    fn zero_mass_state_gets_uniform_row() {
        let rho = OccupancyMeasure::from_table(SaTable::from_rows(vec![vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap())
            .unwrap();
        let pi = policy_from_occupancy(&rho).unwrap();
        assert_eq!(pi.probs().row(1), &[0.5, 0.5]);
    }

    #[test]
    fn negative_measure_rejected() {
        let t = SaTable::from_rows(vec![vec![-1.0, 1.0]]).unwrap();
        assert!(matches!(OccupancyMeasure::from_table(t), Err(Error::InvalidMeasure(_))));
    }

    #[test]
    fn chain_entropies() {
        let mdp = chain(0.5);
        let pi = TabularPolicy::uniform(2, 2);
        let h = causal_entropy_policy(&mdp, &pi).unwrap();
        assert!((h - 2.0 * 2f64.ln()).abs() < 1e-12);
        let rho = occupancy_measure(&mdp, &pi).unwrap();
        assert!((causal_entropy_occupancy(&rho) - 2.0 * 2f64.ln()).abs() < 1e-12);

        let det = TabularPolicy::deterministic(2, &[1, 1]);
        assert_eq!(causal_entropy_policy(&mdp, &det).unwrap(), 0.0);
        assert_eq!(causal_entropy_occupancy(&occupancy_measure(&mdp, &det).unwrap()), 0.0);
    }

    #[test]
    fn lagrangian_special_cases() {
        let mdp = chain(0.5);
        let rho = occupancy_measure(&mdp, &TabularPolicy::uniform(2, 2)).unwrap();
        let zero = OccupancyMeasure::from_table(SaTable::zeros(2, 2)).unwrap();
        let h = causal_entropy_occupancy(&rho);
        assert!((lagrangian_value(&rho, &SaTable::zeros(2, 2), &zero).unwrap() + h).abs() < 1e-15);
        let c = SaTable::from_rows(vec![vec![3.0, -1.0], vec![0.5, 2.0]]).unwrap();
        assert!((lagrangian_value(&rho, &c, &rho).unwrap() + h).abs() < 1e-15);
    }

    #[test]
    fn invalid_mdps_rejected() {
        assert!(TabularMdp::new(1, 1, vec![0.5], vec![1.0], 0.5, None).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![1.0], 1.0, None).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.9], 0.5, None).is_err());
        assert!(TabularMdp::new(2, 1, vec![1.0, 0.0], vec![1.0, 0.0], 0.5, None).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mdp = chain(0.9)
            .with_true_cost(SaTable::from_rows(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap())
            .unwrap();
        let text = mdp.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["n_states", "n_actions", "transition", "start_dist", "discount", "true_cost"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(TabularMdp::from_json(&text).unwrap(), mdp);
        let bad = text.replace("0.9", "1.5");
        assert!(TabularMdp::from_json(&bad).is_err());
    }
}
