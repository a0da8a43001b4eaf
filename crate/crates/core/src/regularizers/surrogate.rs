//! Strictly decreasing convex surrogate losses and the regularizers they induce.
//!
//! For a loss `phi` with range `R`, let `T = -R`. The induced scalar penalty is
//!
//! ```text
//! g_phi(x) = -x + phi(-phi^{-1}(-x))   for x in T,   +inf otherwise
//! ```
//!
//! and the minimum expected risk of classifying learner against expert pairs is
//! `R_phi = sum_{s,a} min_t rho_pi phi(t) + rho_E phi(-t)`, which equals
//! `-psi_phi^*(rho_pi - rho_E)`.

use crate::error::{Error, Result};
use crate::mdp::OccupancyMeasure;
use crate::scalar::minimize_unimodal;

/// Argument tolerance of the scalar searches.
pub const LINE_SEARCH_TOL: f64 = 1e-10;

/// A strictly decreasing convex loss `phi: R -> R` with an evaluable inverse.
#[derive(Clone, Copy)]
pub struct SurrogateLoss {
    pub name: &'static str,
    phi: fn(f64) -> f64,
    inverse: fn(f64) -> Option<f64>,
    derivative: fn(f64) -> f64,
    /// Open range `(inf phi, sup phi)`.
    range: (f64, f64),
}

impl std::fmt::Debug for SurrogateLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurrogateLoss").field("name", &self.name).field("range", &self.range).finish()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl SurrogateLoss {
    /// Builds a custom loss and checks monotonicity and midpoint convexity on a grid.
    pub fn new(
        name: &'static str,
        phi: fn(f64) -> f64,
        inverse: fn(f64) -> Option<f64>,
        derivative: fn(f64) -> f64,
        range: (f64, f64),
    ) -> Result<Self> {
        let loss = Self {
            name,
            phi,
            inverse,
            derivative,
            range,
        };
        loss.validate()?;
        Ok(loss)
    }

    /// `phi(x) = log(1 + exp(-x))`; reduces `g_phi` to the generative-adversarial penalty.
    pub fn logistic() -> Self {
        Self {
            name: "logistic",
            phi: |x| softplus(-x),
            inverse: |y| (y > 0.0).then(|| -y.exp_m1().ln()),
            derivative: |x| -1.0 / (1.0 + x.exp()),
            range: (0.0, f64::INFINITY),
        }
    }

    /// `phi(x) = exp(-x)`.
    pub fn exponential() -> Self {
        Self {
            name: "exponential",
            phi: |x| (-x).exp(),
            inverse: |y| (y > 0.0).then(|| -y.ln()),
            derivative: |x| -(-x).exp(),
            range: (0.0, f64::INFINITY),
        }
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        (self.phi)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        (self.inverse)(y)
            .filter(|u| u.is_finite())
            .ok_or_else(|| Error::Domain(format!("{}: phi^-1({y}) undefined", self.name)))
    }

    /// `T`, the open range of `-phi`.
    pub fn range_t(&self) -> (f64, f64) {
        (-self.range.1, -self.range.0)
    }

    /// Infimum of `phi`, approached as its argument goes to `+inf`.
    pub fn infimum(&self) -> f64 {
        self.range.0
    }

    /// Numerical checks: strictly decreasing and midpoint-convex on `[-10, 10]`.
    pub fn validate(&self) -> Result<()> {
        let grid: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
        for w in grid.windows(2) {
            if !(self.phi(w[1]) < self.phi(w[0])) {
                return Err(Error::Domain(format!("{} is not strictly decreasing near {}", self.name, w[0])));
            }
        }
        for (i, &x) in grid.iter().enumerate() {
            for &y in grid.iter().skip(i + 1).step_by(7) {
                let mid = self.phi(0.5 * (x + y));
                if mid > 0.5 * (self.phi(x) + self.phi(y)) + 1e-12 {
                    return Err(Error::Domain(format!("{} violates convexity on [{x}, {y}]", self.name)));
                }
            }
        }
        Ok(())
    }
}

fn in_open(x: f64, (lo, hi): (f64, f64)) -> bool {
    x > lo && x < hi
}

/// `g_phi(x)`, `+inf` outside `T`.
pub fn surrogate_to_g(phi: &SurrogateLoss, x: f64) -> Result<f64> {
    if !in_open(x, phi.range_t()) {
        return Ok(f64::INFINITY);
    }
    let u = phi.inverse(-x)?;
    Ok(-x + phi.phi(-u))
}

/// `g_phi'(x) = -1 + phi'(-u) / phi'(u)` with `u = phi^{-1}(-x)`.
pub fn surrogate_g_derivative(phi: &SurrogateLoss, x: f64) -> Result<f64> {
    if !in_open(x, phi.range_t()) {
        return Err(Error::Domain(format!("g_phi' undefined at {x}")));
    }
    let u = phi.inverse(-x)?;
    Ok(-1.0 + phi.derivative(-u) / phi.derivative(u))
}

fn check_pair(rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<()> {
    rho_pi.table().check_shape(rho_e.table())
}

/// Minimum expected risk `R_phi(rho_pi, rho_E)`, one golden-section search per pair.
pub fn min_expected_risk(phi: &SurrogateLoss, rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<f64> {
    check_pair(rho_pi, rho_e)?;
    let mut total = 0.0;
    for (&p, &e) in rho_pi.table().as_slice().iter().zip(rho_e.table().as_slice()) {
        total += match (p > 0.0, e > 0.0) {
            (false, false) => 0.0,
            // Infimum at t -> +inf (or -inf): the mass times inf phi.
            (true, false) => p * phi.infimum(),
            (false, true) => e * phi.infimum(),
            (true, true) => {
                let (_, v) = minimize_unimodal(|t| p * phi.phi(t) + e * phi.phi(-t), 0.0, 1.0, LINE_SEARCH_TOL)?;
                v
            }
        };
    }
    Ok(total)
}

/// `psi_phi^*(rho_pi - rho_E) = sum_{s,a} sup_{c in T} (rho_pi - rho_E) c - rho_E g_phi(c)`,
/// maximized directly over costs.
pub fn psi_phi_conjugate(phi: &SurrogateLoss, rho_pi: &OccupancyMeasure, rho_e: &OccupancyMeasure) -> Result<f64> {
    check_pair(rho_pi, rho_e)?;
    let (lo, hi) = phi.range_t();
    // Monotone map from the real line onto T.
    let to_t = move |t: f64| -> f64 {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => lo + (hi - lo) / (1.0 + (-t).exp()),
            (false, true) => hi - t.exp(),
            (true, false) => lo + t.exp(),
            (false, false) => t,
        }
    };
    let mut total = 0.0;
    for (&p, &e) in rho_pi.table().as_slice().iter().zip(rho_e.table().as_slice()) {
        total += match (p > 0.0, e > 0.0) {
            (false, false) => 0.0,
            (true, false) => p * hi,
            (false, true) => -e * phi.infimum(),
            (true, true) => {
                let objective = |t: f64| {
                    let c = to_t(t);
                    match surrogate_to_g(phi, c) {
                        Ok(g) if g.is_finite() => -((p - e) * c - e * g),
                        _ => f64::INFINITY,
                    }
                };
                let (_, v) = minimize_unimodal(objective, 0.0, 1.0, LINE_SEARCH_TOL)?;
                -v
            }
        };
    }
    Ok(total)
}
