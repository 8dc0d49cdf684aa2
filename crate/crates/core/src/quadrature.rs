//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::scalar::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = (b - a) / lit(2.0);
    let mid = (a + b) / lit(2.0);
    let fc = f(mid);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + s * lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * lit(WG[j / 2]);
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol` (with an absolute
/// floor `abs_tol`) by recursive bisection of the worst interval.
pub fn integrate<T: Real>(f: impl Fn(T) -> T, a: T, b: T, rel_tol: T, abs_tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let mut intervals: Vec<(T, T, T, T)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    intervals.push((a, b, v, e));
    for _ in 0..2000 {
        let total: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.2);
        let err: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |best, (i, iv)| if iv.3 > best.1 { (i, iv.3) } else { best });
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            intervals.push((lo, hi, gk15(&f, lo, hi).0, T::zero()));
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    intervals.iter().fold(T::zero(), |s, iv| s + iv.2)
}

/// Integrates over consecutive pieces `points[k]..points[k+1]`.
pub fn integrate_split<T: Real>(f: impl Fn(T) -> T, points: &[T], rel_tol: T, abs_tol: T) -> T {
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .fold(T::zero(), |s, w| s + integrate(&f, w[0], w[1], rel_tol, abs_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 0.0);
        // [x^6/6 - x^3] from -1 to 2
        let exact = (64.0 / 6.0 - 8.0) - (1.0 / 6.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate(|x: f64| (-x).exp(), 0.0, 40.0, 1e-12, 0.0);
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn kink_is_resolved_by_splitting() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate_split(f, &[0.0, 0.3, 1.0], 1e-14, 0.0);
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }
}
