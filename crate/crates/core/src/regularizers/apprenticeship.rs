//! Restricted cost classes `C = { sum_i w_i f_i }` and the best-response cost
//! `argmax_{c in C} E_pi[c] - E_piE[c]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{OccupancyMeasure, SaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostClassKind {
    /// `||w||_2 <= 1`.
    LinearBall,
    /// `w` in the probability simplex.
    ConvexHull,
}

/// Cost class over a tabular `(s, a)` space.
#[derive(Debug, Clone)]
pub struct CostClass {
    kind: CostClassKind,
    basis: Vec<SaTable>,
}

/// Best-response cost in a class and the attained `delta_C^*` value.
#[derive(Debug, Clone)]
pub struct MaxCost {
    pub weights: Vec<f64>,
    pub cost: SaTable,
    pub value: f64,
}

impl CostClass {
    pub fn new(kind: CostClassKind, basis: Vec<SaTable>) -> Result<Self> {
        let first = basis.first().ok_or(Error::Empty("cost class basis"))?;
        for f in &basis[1..] {
            first.check_shape(f)?;
        }
        if basis.iter().any(|f| f.as_slice().iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("cost class basis"));
        }
        Ok(Self { kind, basis })
    }

    /// One indicator feature per `(s, a)` pair.
    pub fn indicator_basis(n_states: usize, n_actions: usize, kind: CostClassKind) -> Self {
        let basis = (0..n_states * n_actions)
            .map(|i| {
                let mut f = SaTable::zeros(n_states, n_actions);
                f.as_mut_slice()[i] = 1.0;
                f
            })
            .collect();
        Self { kind, basis }
    }

    pub fn kind(&self) -> CostClassKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[SaTable] {
        &self.basis
    }

    /// `E_rho[f_i]` for every basis function.
    pub fn feature_expectations(&self, rho: &OccupancyMeasure) -> Result<Vec<f64>> {
        self.basis[0].check_shape(rho.table())?;
        Ok(self.basis.iter().map(|f| f.dot(rho.table())).collect())
    }

    pub fn cost_from_weights(&self, w: &[f64]) -> SaTable {
        let b = &self.basis[0];
        let mut out = SaTable::zeros(b.n_states(), b.n_actions());
        for (f, &wi) in self.basis.iter().zip(w) {
            out = out.axpy(wi, f);
        }
        out
    }

    /// Whether `w` satisfies the class constraint.
    pub fn admits(&self, w: &[f64], tol: f64) -> bool {
        match self.kind {
            CostClassKind::LinearBall => w.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + tol,
            CostClassKind::ConvexHull => w.iter().all(|&x| x >= -tol) && (w.iter().sum::<f64>() - 1.0).abs() <= tol,
        }
    }

    /// Membership test: least-squares weights reproduce `c` and are admissible.
    /// For the convex hull a non-unique representation is resolved by adding
    /// the sum-to-one row to the system.
    pub fn contains(&self, c: &SaTable) -> Result<bool> {
        self.basis[0].check_shape(c)?;
        let n = c.as_slice().len();
        let d = self.dim();
        let hull = self.kind == CostClassKind::ConvexHull;
        let rows = n + usize::from(hull);
        let mut b = nalgebra::DMatrix::<f64>::zeros(rows, d);
        let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
        for (j, f) in self.basis.iter().enumerate() {
            for (i, &v) in f.as_slice().iter().enumerate() {
                b[(i, j)] = v;
            }
        }
        for (i, &v) in c.as_slice().iter().enumerate() {
            rhs[i] = v;
        }
        if hull {
            for j in 0..d {
                b[(n, j)] = 1.0;
            }
            rhs[n] = 1.0;
        }
        let w = b
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Domain(e.to_string()))?;
        let residual = (&b * &w - &rhs).amax();
        let scale = 1.0 + rhs.amax();
        Ok(residual <= 1e-9 * scale && self.admits(w.as_slice(), 1e-9))
    }
}

/// Maximizes `w . gap` over the class constraint set.
///
/// Linear ball: `w = gap / ||gap||`, value `||gap||`, and `w = 0` when the gap
/// vanishes. Convex hull: the vertex of the largest gap entry, lowest index on
/// ties.
pub fn fit_cost_weights(kind: CostClassKind, gap: &[f64]) -> Result<(Vec<f64>, f64)> {
    if gap.is_empty() {
        return Err(Error::Empty("feature gap"));
    }
    if gap.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("feature gap"));
    }
    Ok(match kind {
        CostClassKind::LinearBall => {
            let norm = gap.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                (vec![0.0; gap.len()], 0.0)
            } else {
                (gap.iter().map(|x| x / norm).collect(), norm)
            }
        }
        CostClassKind::ConvexHull => {
            let mut best = 0;
            for (i, &g) in gap.iter().enumerate() {
                if g > gap[best] {
                    best = i;
                }
            }
            let mut w = vec![0.0; gap.len()];
            w[best] = 1.0;
            (w, gap[best])
        }
    })
}

/// `delta_C^*(rho_pi - rho_E)` and its maximizing cost.
pub fn apprenticeship_max_cost(rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure, cls: &CostClass) -> Result<MaxCost> {
    let e_pi = cls.feature_expectations(rho_pi)?;
    let e_e = cls.feature_expectations(rho_e)?;
    let gap: Vec<f64> = e_pi.iter().zip(&e_e).map(|(a, b)| a - b).collect();
    let (weights, value) = fit_cost_weights(cls.kind, &gap)?;
    Ok(MaxCost {
        cost: cls.cost_from_weights(&weights),
        weights,
        value,
    })
}
