//! Grid-search conjugates for tiny instances, used as a test oracle.

use crate::error::{Error, Result};
use crate::mdp::SaTable;

use super::{CostClassKind, Regularizer};

/// Product grid over a box, refined by zooming around the incumbent.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    /// Points per axis at every level.
    pub points: usize,
    /// Zoom levels after the first pass.
    pub refinements: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: -10.0,
            hi: -1e-9,
            points: 41,
            refinements: 12,
        }
    }
}

const MAX_DIM: usize = 6;
const MAX_POINTS: f64 = 5e6;

struct Search<'a> {
    f: &'a dyn Fn(&[f64]) -> Option<f64>,
    dim: usize,
    points: usize,
}

impl Search<'_> {
    /// Best grid point over `[lo_i, hi_i]`, plus the best value on the outer
    /// boundary `{lo, hi}` and off it when `outer` is given.
    fn scan(&self, lo: &[f64], hi: &[f64], outer: Option<(f64, f64)>) -> (Vec<f64>, f64, f64, f64) {
        let mut idx = vec![0usize; self.dim];
        let mut x = vec![0.0; self.dim];
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        let (mut best_edge, mut best_inner) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        loop {
            let mut on_edge = false;
            for i in 0..self.dim {
                x[i] = if self.points == 1 {
                    0.5 * (lo[i] + hi[i])
                } else {
                    lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (self.points - 1) as f64
                };
                if let Some((l, h)) = outer {
                    on_edge |= x[i] == l || x[i] == h;
                }
            }
            if let Some(v) = (self.f)(&x).filter(|v| v.is_finite()) {
                if v > best.1 {
                    best = (x.clone(), v);
                }
                if on_edge {
                    best_edge = best_edge.max(v);
                } else {
                    best_inner = best_inner.max(v);
                }
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return (best.0, best.1, best_edge, best_inner);
                }
                idx[k] += 1;
                if idx[k] < self.points {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn run(&self, lo: f64, hi: f64, refinements: usize, flag_boundary: bool) -> Result<f64> {
        let (mut l, mut h) = (vec![lo; self.dim], vec![hi; self.dim]);
        let (mut x, mut v, edge, inner) = self.scan(&l, &h, Some((lo, hi)));
        if v == f64::NEG_INFINITY {
            return Err(Error::Domain("objective is -inf on the whole grid".into()));
        }
        if flag_boundary && edge > inner + 1e-12 * (1.0 + inner.abs()) {
            return Err(Error::GridBoundary);
        }
        for _ in 0..refinements {
            for i in 0..self.dim {
                let step = (h[i] - l[i]) / (self.points.max(2) - 1) as f64;
                l[i] = (x[i] - 2.0 * step).max(lo);
                h[i] = (x[i] + 2.0 * step).min(hi);
            }
            let (nx, nv, _, _) = self.scan(&l, &h, None);
            if nv > v {
                x = nx;
                v = nv;
            }
        }
        Ok(v)
    }
}

/// `psi^*(x) = sup_c <x, c> - psi(c)`, searched on a bounded grid.
///
/// Cost-space variants search `c` in `[lo, hi]^{S*A}`; the indicator searches
/// its weight set directly (unit ball or simplex), ignoring `lo` and `hi`.
/// A supremum on the outer box boundary means the box truncates the problem
/// and is reported as [`Error::GridBoundary`].
pub fn conjugate_brute_force(psi: &Regularizer, x: &SaTable, grid: &GridSpec) -> Result<f64> {
    let n = x.as_slice().len();
    if n > MAX_DIM {
        return Err(Error::Config(format!("brute force limited to S*A <= {MAX_DIM}, got {n}")));
    }
    if grid.points == 0 || !(grid.lo < grid.hi) {
        return Err(Error::Config("grid needs points > 0 and lo < hi".into()));
    }
    let dim = match psi {
        Regularizer::Indicator(cls) => match cls.kind() {
            CostClassKind::LinearBall => cls.dim(),
            CostClassKind::ConvexHull => cls.dim() - 1,
        },
        _ => n,
    };
    if (grid.points as f64).powi(dim as i32) > MAX_POINTS {
        return Err(Error::Config(format!("{}^{dim} grid points exceeds budget", grid.points)));
    }
    if let Regularizer::Indicator(cls) = psi {
        cls.basis()[0].check_shape(x)?;
        let scores: Vec<f64> = cls.basis().iter().map(|f| f.dot(x)).collect();
        if dim == 0 {
            return Ok(scores[0]);
        }
        let kind = cls.kind();
        let f = move |w: &[f64]| -> Option<f64> {
            match kind {
                CostClassKind::LinearBall => {
                    (w.iter().map(|a| a * a).sum::<f64>() <= 1.0).then(|| w.iter().zip(&scores).map(|(a, b)| a * b).sum())
                }
                CostClassKind::ConvexHull => {
                    let last = 1.0 - w.iter().sum::<f64>();
                    (last >= -1e-15).then(|| {
                        w.iter().zip(&scores).map(|(a, b)| a * b).sum::<f64>() + last.max(0.0) * scores[dim]
                    })
                }
            }
        };
        let (lo, hi) = match kind {
            CostClassKind::LinearBall => (-1.0, 1.0),
            CostClassKind::ConvexHull => (0.0, 1.0),
        };
        return Search {
            f: &f,
            dim,
            points: grid.points,
        }
        .run(lo, hi, grid.refinements, false);
    }
    let (n_s, n_a) = (x.n_states(), x.n_actions());
    let f = |c: &[f64]| -> Option<f64> {
        let table = SaTable::from_flat(n_s, n_a, c.to_vec()).ok()?;
        let p = psi.eval(&table).ok()?;
        Some(x.dot(&table) - p)
    };
    Search {
        f: &f,
        dim,
        points: grid.points,
    }
    .run(grid.lo, grid.hi, grid.refinements, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::OccupancyMeasure;
    use crate::regularizers::{apprenticeship_max_cost, psi_ga_conjugate, CostClass};

    fn measure(rows: Vec<Vec<f64>>) -> OccupancyMeasure {
        OccupancyMeasure::from_table(SaTable::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn constant_at_zero() {
        let v = conjugate_brute_force(&Regularizer::Constant(2.5), &SaTable::zeros(2, 1), &GridSpec::default()).unwrap();
        assert_eq!(v, -2.5);
    }

    #[test]
    fn ga_two_by_one_matches_closed_form() {
        let p = measure(vec![vec![3.0], vec![7.0]]);
        let e = measure(vec![vec![6.0], vec![4.0]]);
        let psi = Regularizer::GenerativeAdversarial { expert: e.clone() };
        let x = p.table().axpy(-1.0, e.table());
        let v = conjugate_brute_force(&psi, &x, &GridSpec::default()).unwrap();
        assert!((v - psi_ga_conjugate(&p, &e).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn truncating_box_is_flagged() {
        // The maximizer c = log(1/4) lies left of the box.
        let p = measure(vec![vec![1.0]]);
        let e = measure(vec![vec![3.0]]);
        let psi = Regularizer::GenerativeAdversarial { expert: e.clone() };
        let x = p.table().axpy(-1.0, e.table());
        let grid = GridSpec { lo: -1.0, ..GridSpec::default() };
        assert!(matches!(conjugate_brute_force(&psi, &x, &grid), Err(Error::GridBoundary)));
    }

    #[test]
    fn hull_matches_apprenticeship() {
        let basis = vec![
            SaTable::from_rows(vec![vec![1.0, 0.2], vec![0.0, -0.5]]).unwrap(),
            SaTable::from_rows(vec![vec![0.3, 0.3], vec![0.9, 0.1]]).unwrap(),
        ];
        let cls = CostClass::new(CostClassKind::ConvexHull, basis).unwrap();
        let p = measure(vec![vec![1.0, 2.0], vec![0.5, 1.5]]);
        let e = measure(vec![vec![0.2, 0.8], vec![2.0, 2.0]]);
        let exact = apprenticeship_max_cost(&p, &e, &cls).unwrap().value;
        let x = p.table().axpy(-1.0, e.table());
        let v = conjugate_brute_force(&Regularizer::Indicator(cls), &x, &GridSpec::default()).unwrap();
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn oversized_instance_rejected() {
        let x = SaTable::zeros(4, 2);
        assert!(conjugate_brute_force(&Regularizer::Constant(0.0), &x, &GridSpec::default()).is_err());
    }
}
