//! Bracketed one-dimensional root finding shared by the solvers.

use crate::scalar::{lit, Real};

/// Newton iteration safeguarded by bisection.
///
/// `lo` and `hi` must bracket a sign change of `f`. Iterates until the bracket
/// is narrower than `xtol` or `|f| <= ftol`.
pub(crate) fn safeguarded_newton<T: Real>(
    f: impl Fn(T) -> T,
    df: impl Fn(T) -> T,
    lo: T,
    hi: T,
    xtol: T,
    ftol: T,
    max_iter: usize,
) -> T {
    let two = lit::<T>(2.0);
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return a;
    }
    if fb == T::zero() {
        return b;
    }
    // orient so that f(a) < 0 < f(b)
    if fa > T::zero() {
        core::mem::swap(&mut a, &mut b);
    }
    let mut x = (a + b) / two;
    for _ in 0..max_iter {
        let fx = f(x);
        if fx.abs() <= ftol {
            return x;
        }
        if fx < T::zero() {
            a = x;
        } else {
            b = x;
        }
        if (b - a).abs() <= xtol {
            return (a + b) / two;
        }
        let d = df(x);
        let newton = x - fx / d;
        let (left, right) = if a < b { (a, b) } else { (b, a) };
        let next = if d.is_finite() && d != T::zero() && newton > left && newton < right {
            newton
        } else {
            (a + b) / two
        };
        if (next - x).abs() <= T::epsilon() * lit(2.0) * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Plain bisection to machine resolution; `f(lo)` and `f(hi)` must differ in sign.
pub(crate) fn bisect<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, max_iter: usize) -> T {
    let two = lit::<T>(2.0);
    let (mut a, mut b) = (lo, hi);
    let neg_at_a = f(a) < T::zero();
    for _ in 0..max_iter {
        let m = (a + b) / two;
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        if (f(m) < T::zero()) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    (a + b) / two
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt_two() {
        let r = safeguarded_newton(|x: f64| x * x - 2.0, |x| 2.0 * x, 0.0, 2.0, 1e-15, 0.0, 100);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_survives_flat_derivative() {
        // derivative vanishes at the midpoint start
        let r = safeguarded_newton(|x: f64| x.powi(3) - 0.001, |x| 3.0 * x * x, -1.0, 1.0, 1e-15, 0.0, 200);
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bisect_handles_decreasing_functions() {
        let r = bisect(|x: f64| 1.0 - x, 0.0, 3.0, 200);
        assert!((r - 1.0).abs() < 1e-15);
    }
}
