//! One-dimensional minimization of unimodal functions.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_EXPANSIONS: usize = 200;
const MAX_SECTIONS: usize = 500;

/// Finds `(a, b)` bracketing a minimum of `f`, starting at `x0` with initial
/// step `step` and expanding geometrically.
pub fn bracket_minimum(f: &impl Fn(f64) -> f64, x0: f64, step: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = (x0, x0 + step);
    let (mut fa, mut fb) = (f(a), f(b));
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + (b - a) / INV_PHI;
    let mut fc = f(c);
    let mut n = 0;
    while fc <= fb {
        if n >= MAX_EXPANSIONS || !c.is_finite() {
            return Err(Error::NonConvergence {
                iters: n,
                residual: fc,
            });
        }
        a = b;
        b = c;
        fb = fc;
        c = b + (b - a) / INV_PHI;
        fc = f(c);
        n += 1;
    }
    Ok(if a < c { (a, c) } else { (c, a) })
}

/// Golden-section search on `[a, b]` until the bracket is narrower than `tol`.
pub fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut n = 0;
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if n >= MAX_SECTIONS {
            return Err(Error::NonConvergence {
                iters: n,
                residual: b - a,
            });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        n += 1;
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Minimizes a unimodal `f` over the real line.
pub fn minimize_unimodal(f: impl Fn(f64) -> f64, x0: f64, step: f64, tol: f64) -> Result<(f64, f64)> {
    let (a, b) = bracket_minimum(&f, x0, step)?;
    golden_section(&f, a, b, tol)
}
