//! Convex cost regularizers `psi`, their conjugates, and divergence identities.
//!
//! For a regularizer `psi` over cost tables, the imitation objective is
//! `psi^*(rho_pi - rho_E) - H(pi)`. Each variant here exposes a value, a
//! subgradient (where dual ascent needs one), and its conjugate at a measure
//! difference.

mod apprenticeship;
mod brute;
mod surrogate;

pub use apprenticeship::{apprenticeship_max_cost, fit_cost_weights, CostClass, CostClassKind, MaxCost};
pub use brute::{conjugate_brute_force, GridSpec};
pub use surrogate::{
    min_expected_risk, psi_phi_conjugate, surrogate_g_derivative, surrogate_to_g, SurrogateLoss, LINE_SEARCH_TOL,
};

use crate::error::{Error, Result};
use crate::mdp::{xlogy, OccupancyMeasure, SaTable};

/// A closed proper convex function on cost tables.
#[derive(Debug, Clone)]
pub enum Regularizer {
    /// `psi(c) = k`. Its conjugate is `-k` at zero and `+inf` elsewhere.
    Constant(f64),
    /// `psi = delta_C`, zero on the cost class and `+inf` off it.
    Indicator(CostClass),
    /// `psi_GA(c) = sum rho_E g(c)` with `g(x) = -x - log(1 - e^x)` on `x < 0`.
    GenerativeAdversarial { expert: OccupancyMeasure },
    /// `psi_phi(c) = sum rho_E g_phi(c)` for a surrogate loss `phi`.
    Surrogate { loss: SurrogateLoss, expert: OccupancyMeasure },
}

/// `g(x) = -x - log(1 - e^x)` for `x < 0`, `+inf` otherwise.
pub fn ga_penalty(x: f64) -> f64 {
    if x < 0.0 {
        -x - (-x.exp_m1()).ln()
    } else {
        f64::INFINITY
    }
}

/// `g'(x) = -1 + 1 / (e^{-x} - 1)` for `x < 0`.
pub fn ga_penalty_derivative(x: f64) -> f64 {
    -1.0 + 1.0 / (-x).exp_m1()
}

/// `psi_GA(c)`; `+inf` as soon as any entry of `c` is non-negative.
pub fn eval_psi_ga(c: &SaTable, rho_e: &OccupancyMeasure) -> f64 {
    if c.as_slice().iter().any(|&x| !(x < 0.0)) {
        return f64::INFINITY;
    }
    c.as_slice().iter().zip(rho_e.table().as_slice()).map(|(&x, &e)| e * ga_penalty(x)).sum()
}

/// `psi_GA^*(rho_pi - rho_E)`: the optimal negative log loss of classifying
/// learner against expert pairs, attained at `D* = rho_pi / (rho_pi + rho_E)`.
pub fn psi_ga_conjugate(rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<f64> {
    rho_pi.table().check_shape(rho_e.table())?;
    Ok(rho_pi
        .table()
        .as_slice()
        .iter()
        .zip(rho_e.table().as_slice())
        .map(|(&p, &e)| if p + e > 0.0 { xlogy(p, p / (p + e)) + xlogy(e, e / (p + e)) } else { 0.0 })
        .sum())
}

/// Generalized Jensen-Shannon divergence
/// `KL(rho_pi || m) + KL(rho_E || m)` with `m = (rho_pi + rho_E) / 2`.
pub fn jsd_occupancy(rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<f64> {
    rho_pi.table().check_shape(rho_e.table())?;
    Ok(rho_pi
        .table()
        .as_slice()
        .iter()
        .zip(rho_e.table().as_slice())
        .map(|(&p, &e)| if p + e > 0.0 { xlogy(p, 2.0 * p / (p + e)) + xlogy(e, 2.0 * e / (p + e)) } else { 0.0 })
        .sum())
}

/// `D*(s,a) = rho_pi / (rho_pi + rho_E)`, one half where both vanish.
pub fn optimal_discriminator(rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<SaTable> {
    rho_pi.table().check_shape(rho_e.table())?;
    let (s, a) = (rho_pi.n_states(), rho_pi.n_actions());
    Ok(SaTable::from_fn(s, a, |i, j| {
        let (p, e) = (rho_pi.get(i, j), rho_e.get(i, j));
        if p + e > 0.0 {
            p / (p + e)
        } else {
            0.5
        }
    }))
}

/// `sum rho_pi log D + rho_E log(1 - D)`.
pub fn discriminator_objective(d: &SaTable, rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<f64> {
    d.check_shape(rho_pi.table())?;
    d.check_shape(rho_e.table())?;
    Ok(d.as_slice()
        .iter()
        .zip(rho_pi.table().as_slice().iter().zip(rho_e.table().as_slice()))
        .map(|(&d, (&p, &e))| xlogy(p, d) + xlogy(e, 1.0 - d))
        .sum())
}

impl Regularizer {
    /// `psi(c)` as an extended real.
    pub fn eval(&self, c: &SaTable) -> Result<f64> {
        match self {
            Regularizer::Constant(k) => Ok(*k),
            Regularizer::Indicator(cls) => Ok(if cls.contains(c)? { 0.0 } else { f64::INFINITY }),
            Regularizer::GenerativeAdversarial { expert } => {
                c.check_shape(expert.table())?;
                Ok(eval_psi_ga(c, expert))
            }
            Regularizer::Surrogate { loss, expert } => {
                c.check_shape(expert.table())?;
                let mut total = 0.0;
                for (&x, &e) in c.as_slice().iter().zip(expert.table().as_slice()) {
                    let g = surrogate_to_g(loss, x)?;
                    if g.is_infinite() {
                        return Ok(f64::INFINITY);
                    }
                    total += e * g;
                }
                Ok(total)
            }
        }
    }

    /// A subgradient of `psi` at `c`. The indicator has no useful subgradient
    /// oracle and is rejected.
    pub fn subgradient(&self, c: &SaTable) -> Result<SaTable> {
        match self {
            Regularizer::Constant(_) => Ok(SaTable::zeros(c.n_states(), c.n_actions())),
            Regularizer::Indicator(_) => Err(Error::Unsupported("subgradient of an indicator regularizer".into())),
            Regularizer::GenerativeAdversarial { expert } => {
                c.check_shape(expert.table())?;
                if c.as_slice().iter().any(|&x| !(x < 0.0)) {
                    return Err(Error::Domain("psi_GA subgradient needs c < 0".into()));
                }
                Ok(SaTable::from_fn(c.n_states(), c.n_actions(), |s, a| {
                    expert.get(s, a) * ga_penalty_derivative(c.get(s, a))
                }))
            }
            Regularizer::Surrogate { loss, expert } => {
                c.check_shape(expert.table())?;
                let mut out = SaTable::zeros(c.n_states(), c.n_actions());
                for (o, (&x, &e)) in out.as_mut_slice().iter_mut().zip(c.as_slice().iter().zip(expert.table().as_slice())) {
                    *o = e * surrogate_g_derivative(loss, x)?;
                }
                Ok(out)
            }
        }
    }

    /// `psi^*(rho_pi - rho_E)` through the closed forms.
    pub fn conjugate(&self, rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<f64> {
        rho_pi.table().check_shape(rho_e.table())?;
        match self {
            Regularizer::Constant(k) => Ok(if rho_pi.table().max_abs_diff(rho_e.table()) == 0.0 { -k } else { f64::INFINITY }),
            Regularizer::Indicator(cls) => Ok(apprenticeship_max_cost(rho_pi, rho_e, cls)?.value),
            Regularizer::GenerativeAdversarial { .. } => psi_ga_conjugate(rho_pi, rho_e),
            Regularizer::Surrogate { loss, .. } => Ok(-min_expected_risk(loss, rho_pi, rho_e)?),
        }
    }

    /// Supremum of admissible cost entries, if the domain is bounded above.
    pub fn cost_upper_bound(&self) -> Option<f64> {
        match self {
            Regularizer::GenerativeAdversarial { .. } => Some(0.0),
            Regularizer::Surrogate { loss, .. } => Some(loss.range_t().1),
            _ => None,
        }
    }
}
