//! Bracketing scalar root finder.
//!
//! All equilibrium equations in this crate are strictly monotone in their
//! unknown, so a guarded bracketing method is the right tool: a secant
//! (regula falsi) step for speed, falling back to plain bisection whenever
//! the secant step stalls or leaves the bracket. Brackets can be auto-expanded
//! geometrically before solving.

use crate::error::{Error, Result};

/// Hard iteration cap; generous, since each step at least halves the bracket
/// every other iteration.
const MAX_ITER: usize = 200;

/// Expand `[lo, hi]` geometrically until `f` changes sign across it.
///
/// `f` must be increasing. `lo` is divided and `hi` multiplied by `factor`
/// until `f(lo) <= 0 <= f(hi)`, within the absolute caps `lo_min`/`hi_max`.
pub fn expand_bracket<F: Fn(f64) -> f64>(
    f: &F,
    mut lo: f64,
    mut hi: f64,
    factor: f64,
    lo_min: f64,
    hi_max: f64,
) -> Result<(f64, f64)> {
    debug_assert!(lo > 0.0 && hi > lo && factor > 1.0);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    while flo > 0.0 {
        if lo <= lo_min {
            return Err(Error::SolverFailure {
                lo,
                hi,
                iterations: 0,
                residual: flo,
            });
        }
        hi = lo;
        fhi = flo;
        lo = (lo / factor).max(lo_min);
        flo = f(lo);
    }
    while fhi < 0.0 {
        if hi >= hi_max {
            return Err(Error::SolverFailure {
                lo,
                hi,
                iterations: 0,
                residual: fhi,
            });
        }
        lo = hi;
        flo = fhi;
        hi = (hi * factor).min(hi_max);
        fhi = f(hi);
    }
    let _ = (flo, fhi);
    Ok((lo, hi))
}

/// Solve `f(x) = 0` for increasing `f` with `f(lo) <= 0 <= f(hi)`.
///
/// Returns as soon as `|f(x)| < tol`. A secant step through the current
/// bracket endpoints is tried first; if it falls outside the bracket or two
/// consecutive steps fail to halve the bracket, a bisection step is taken
/// instead. Errors with the final bracket if the residual tolerance is not
/// reached within the iteration cap.
pub fn solve_increasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Domain(format!(
            "root not bracketed: f({lo:.6e}) = {flo:.3e}, f({hi:.6e}) = {fhi:.3e}"
        )));
    }
    if flo.abs() < tol {
        return Ok(lo);
    }
    if fhi.abs() < tol {
        return Ok(hi);
    }

    let mut width_two_ago = hi - lo;
    for iter in 0..MAX_ITER {
        // Secant through the bracket endpoints; bisect when it degenerates
        // or stops making progress.
        let mut x = lo - flo * (hi - lo) / (fhi - flo);
        let stalled = iter >= 2 && (hi - lo) > 0.5 * width_two_ago;
        if !(x > lo && x < hi) || stalled {
            x = 0.5 * (lo + hi);
        }
        width_two_ago = if iter % 2 == 0 {
            hi - lo
        } else {
            width_two_ago
        };

        if x <= lo || x >= hi {
            // Bracket exhausted at f64 resolution; report the best endpoint.
            let best = if flo.abs() <= fhi.abs() { lo } else { hi };
            let res = f(best);
            if res.abs() < tol {
                return Ok(best);
            }
            return Err(Error::SolverFailure {
                lo,
                hi,
                iterations: iter,
                residual: res,
            });
        }

        let fx = f(x);
        if fx.abs() < tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    Err(Error::SolverFailure {
        lo,
        hi,
        iterations: MAX_ITER,
        residual: if flo.abs() <= fhi.abs() { flo } else { fhi },
    })
}

/// Minimize a unimodal `f` on `[a, b]` by golden-section search.
///
/// `tol` is the absolute width of the final interval. Returns the midpoint
/// of the final bracket and `f` there.
pub fn golden_minimize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
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
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
