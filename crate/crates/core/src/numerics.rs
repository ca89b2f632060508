//! Shared numerical routines: bracketed root finding, adaptive quadrature,
//! and level-set extraction for scalar functions.

use crate::error::{Error, Result};

/// Finds a root of `f` inside the bracket `[lo, hi]`.
///
/// Bisection interleaved with secant steps; the bracket is maintained at
/// every iteration, so convergence is unconditional for continuous `f` with
/// a sign change. Stops when the residual or the bracket width drops below
/// `tol`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let max_iter = 200;
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::numeric(format!(
            "root bracket evaluates to NaN: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numeric(format!(
            "no sign change on bracket [{a}, {b}]: f(a) = {fa}, f(b) = {fb}"
        )));
    }
    for _ in 0..max_iter {
        // Secant proposal, rejected when it leaves the bracket interior.
        let mid = 0.5 * (a + b);
        let mut x = if (fb - fa).abs() > f64::MIN_POSITIVE {
            a - fa * (b - a) / (fb - fa)
        } else {
            mid
        };
        let width = b - a;
        if !(x > a + 0.01 * width && x < b - 0.01 * width) {
            x = mid;
        }
        let fx = f(x);
        if fx == 0.0 || fx.abs() < tol && width < tol.max(1e-14) * (1.0 + x.abs()) {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a < 1e-15 * (1.0 + b.abs()) {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    let mut residual = 0.0;
    let v = adaptive(f, a, b, fa, fm, fb, whole, tol, 50, &mut residual);
    if residual > tol {
        return Err(Error::numeric(format!(
            "quadrature on [{a}, {b}] did not converge: residual estimate {residual:.3e} > {tol:.3e}"
        )));
    }
    Ok(v)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    residual: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = f(0.5 * (a + m));
    let rm = f(0.5 * (m + b));
    let left = simpson(a, m, fa, lm, fm);
    let right = simpson(m, b, fm, rm, fb);
    let err = (left + right - whole).abs() / 15.0;
    if err <= tol || depth == 0 {
        if depth == 0 && err > tol {
            *residual += err;
        }
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, lm, fm, left, 0.5 * tol, depth - 1, residual)
        + adaptive(f, m, b, fm, rm, fb, right, 0.5 * tol, depth - 1, residual)
}

/// A half-open interval `(lo, hi]` on the real line (`hi` may be `+inf`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

/// Computes `{x in (lo, hi) : f(x) > level}` as a union of disjoint intervals.
///
/// The function is scanned on `grid_n` points; each sign-change bracket of
/// `f - level` is refined by bisection. Intended for continuous `f`; regions
/// thinner than the grid resolution can be missed, which is documented
/// behaviour for the generic (non-monotone) pricing-density path.
pub fn upper_level_set<F: Fn(f64) -> f64>(
    f: F,
    level: f64,
    lo: f64,
    hi: f64,
    grid_n: usize,
) -> Result<Vec<Interval>> {
    assert!(grid_n >= 2);
    let xs: Vec<f64> = (0..=grid_n)
        .map(|i| lo + (hi - lo) * i as f64 / grid_n as f64)
        .collect();
    let gs: Vec<f64> = xs.iter().map(|&x| f(x) - level).collect();
    let inside: Vec<bool> = gs.iter().map(|&g| g > 0.0).collect();
    let mut boundaries: Vec<f64> = Vec::new();
    for i in 0..grid_n {
        if inside[i] != inside[i + 1] {
            // find_root returns the endpoint when the grid hit the level.
            boundaries.push(find_root(|x| f(x) - level, xs[i], xs[i + 1], 1e-13)?);
        }
    }
    let mut out = Vec::new();
    let mut is_in = inside[0];
    let mut start = lo;
    for b in boundaries {
        if is_in {
            out.push(Interval::new(start, b));
        }
        start = b;
        is_in = !is_in;
    }
    if is_in {
        out.push(Interval::new(start, hi));
    }
    out.retain(|iv| !iv.is_empty());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn root_of_quadratic() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn root_requires_sign_change() {
        assert!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn integrates_smooth_function() {
        let v = integrate(&|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1f64.exp() - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn level_set_of_parabola() {
        // x^2 > 1 on (-2, 2) is (-2, -1) u (1, 2).
        let ivs = upper_level_set(|x| x * x, 1.0, -2.0, 2.0, 64).unwrap();
        assert_eq!(ivs.len(), 2);
        assert_abs_diff_eq!(ivs[0].hi, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ivs[1].lo, 1.0, epsilon = 1e-9);
    }
}
