//! Monotone root finding: bracket by doubling, then safeguarded secant steps.

use crate::error::{Error, Result};

/// Solves `f(x) = target` for a strictly increasing `f` on `[lo, ∞)`.
///
/// The upper end of the bracket is found by doubling from `hint`. Iteration
/// stops once the bracket width is below `rel_tol * |x|` (or the floating
/// point grid is exhausted).
pub fn solve_increasing<F>(f: F, target: f64, lo: f64, hint: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut a = lo;
    let mut fa = f(a) - target;
    if fa >= 0.0 {
        return Ok(a);
    }
    let mut step = if hint > 0.0 { hint } else { 1.0 };
    let mut b = a + step;
    let mut fb = f(b) - target;
    let mut doublings = 0;
    while fb < 0.0 {
        a = b;
        fa = fb;
        step *= 2.0;
        b = a + step;
        fb = f(b) - target;
        doublings += 1;
        if doublings > 2000 || !b.is_finite() {
            return Err(Error::Domain(format!(
                "could not bracket the solution of f(x) = {target}"
            )));
        }
    }
    refine(f, target, a, fa, b, fb, rel_tol)
}

/// Illinois-type regula falsi with a bisection fallback on a bracket where
/// `fa < 0 <= fb`.
fn refine<F>(f: F, target: f64, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut side = 0i8;
    for _ in 0..3000 {
        let width = b - a;
        if width <= rel_tol * b.abs().max(a.abs()) || width <= f64::MIN_POSITIVE {
            break;
        }
        let mut x = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
        // keep the iterate well inside the bracket
        let lo = a + 0.01 * width;
        let hi = b - 0.01 * width;
        if !(x > lo && x < hi) {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            break;
        }
        let fx = f(x) - target;
        if fx.is_nan() {
            return Err(Error::Domain(format!("function is not evaluable at {x}")));
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fb.abs() <= fa.abs() { b } else { a })
}

/// Bisection to full floating point resolution for `f` decreasing on
/// `[lo, hi]` with `f(lo) >= target >= f(hi)`.
pub fn bisect_decreasing<F>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
