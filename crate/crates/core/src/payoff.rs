//! Piecewise-linear payoffs and their concave projection.

use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayoffError {
    #[error("no knots")]
    Empty,
    #[error("first knot must sit at x = 0")]
    FirstKnotNotZero,
    #[error("knots not ascending")]
    KnotsNotAscending,
    #[error("not concave (slope rises by {0:e} at knot {1})")]
    NotConcave(f64, usize),
    #[error("bad tail slope")]
    BadTailSlope,
    #[error("non-finite knot")]
    NonFinite,
    #[error("x must be nonnegative")]
    NegativeArgument,
}

/// Continuous piecewise-linear function on `[0, ∞)`: linear interpolation
/// between knots and slope `tail` beyond the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
    tail: T,
}

/// One linear piece `[start, end)` with constant slope; the last piece has `end = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub start: T,
    pub end: T,
    pub slope: T,
}

fn check_knots<T: Real>(xs: &[T], ys: &[T]) -> Result<(), PayoffError> {
    if xs.is_empty() {
        return Err(PayoffError::Empty);
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(PayoffError::NonFinite);
    }
    if xs[0] != T::zero() {
        return Err(PayoffError::FirstKnotNotZero);
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PayoffError::KnotsNotAscending);
    }
    Ok(())
}

impl<T: Real> PiecewiseLinear<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>, tail: T) -> Result<Self, PayoffError> {
        if xs.len() != ys.len() {
            return Err(PayoffError::KnotsNotAscending);
        }
        check_knots(&xs, &ys)?;
        if !tail.is_finite() {
            return Err(PayoffError::BadTailSlope);
        }
        let slopes = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        Ok(PiecewiseLinear { xs, ys, slopes, tail })
    }

    pub fn from_knots(knots: &[(T, T)], tail: T) -> Result<Self, PayoffError> {
        let (xs, ys) = knots.iter().copied().unzip();
        Self::new(xs, ys, tail)
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn knots(&self) -> Vec<(T, T)> {
        self.xs.iter().copied().zip(self.ys.iter().copied()).collect()
    }

    /// Slopes between consecutive knots.
    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn slope_tail(&self) -> T {
        self.tail
    }

    pub fn value_at_zero(&self) -> T {
        self.ys[0]
    }

    /// Index of the segment containing `x` (right-continuous convention);
    /// `slopes.len()` denotes the tail.
    pub(crate) fn segment_index(&self, x: T) -> usize {
        // first knot strictly greater than x
        let upper = self.xs.partition_point(|&k| k <= x);
        upper.saturating_sub(1).min(self.slopes.len())
    }

    fn eval_unchecked(&self, x: T) -> T {
        let k = self.segment_index(x);
        let slope = self.slope_of(k);
        self.ys[k] + slope * (x - self.xs[k])
    }

    pub(crate) fn slope_of(&self, k: usize) -> T {
        if k < self.slopes.len() {
            self.slopes[k]
        } else {
            self.tail
        }
    }

    pub fn eval(&self, x: T) -> Result<T, PayoffError> {
        if x < T::zero() {
            return Err(PayoffError::NegativeArgument);
        }
        Ok(self.eval_unchecked(x))
    }

    /// Right derivative; at a knot this is the slope of the segment to its right.
    pub fn right_derivative(&self, x: T) -> Result<T, PayoffError> {
        if x < T::zero() {
            return Err(PayoffError::NegativeArgument);
        }
        Ok(self.slope_of(self.segment_index(x)))
    }

    /// Value at `x ≥ 0`; callers guarantee the sign.
    #[inline]
    pub(crate) fn at(&self, x: T) -> T {
        self.eval_unchecked(x)
    }

    /// The linear pieces, ending with the infinite tail.
    pub fn segments(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        let n = self.xs.len();
        (0..n).map(move |k| Segment {
            start: self.xs[k],
            end: if k + 1 < n { self.xs[k + 1] } else { T::infinity() },
            slope: self.slope_of(k),
        })
    }

    /// Pieces restricted to `[0, b]`, dropping empty ones.
    pub fn segments_until(&self, b: T) -> Vec<Segment<T>> {
        self.segments()
            .take_while(|s| s.start < b)
            .map(|s| Segment { end: s.end.min(b), ..s })
            .collect()
    }

    /// Largest rise of a slope over its left neighbour (0 when concave).
    fn worst_violation(&self) -> (T, usize) {
        let mut worst = (T::zero(), 0);
        let all: Vec<T> = self.slopes.iter().copied().chain(std::iter::once(self.tail)).collect();
        for (k, w) in all.windows(2).enumerate() {
            let rise = w[1] - w[0];
            if rise > worst.0 {
                worst = (rise, k + 1);
            }
        }
        worst
    }
}

/// A concave [`PiecewiseLinear`] payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavePayoff<T>(PiecewiseLinear<T>);

impl<T: Real> ConcavePayoff<T> {
    /// Validates an externally supplied payoff: concave with tail slope in `[0, 1]`.
    pub fn new(knots: &[(T, T)], slope_tail: T) -> Result<Self, PayoffError> {
        let pw = PiecewiseLinear::from_knots(knots, slope_tail)?;
        if !(slope_tail >= T::zero() && slope_tail <= T::one()) {
            return Err(PayoffError::BadTailSlope);
        }
        let (rise, at) = pw.worst_violation();
        let scale = pw.slopes.iter().fold(T::one(), |m, s| m.max(s.abs()));
        if rise > T::epsilon() * lit::<T>(16.0) * scale {
            return Err(PayoffError::NotConcave(rise.to_f64().unwrap_or(f64::NAN), at));
        }
        Ok(ConcavePayoff(pw))
    }

    /// Wraps a payoff already known to be concave up to rounding.
    pub(crate) fn from_piecewise(pw: PiecewiseLinear<T>) -> Self {
        ConcavePayoff(pw)
    }

    /// `ω(x) = x`.
    pub fn identity() -> Self {
        ConcavePayoff(PiecewiseLinear::new(vec![T::zero()], vec![T::zero()], T::one()).expect("valid"))
    }

    /// Replaces the tail slope; it must not exceed the last interior slope.
    pub fn with_tail(self, tail: T) -> Result<Self, PayoffError> {
        let last = self.0.slopes.last().copied().unwrap_or(T::infinity());
        let tol = T::epsilon() * lit(64.0) * T::one().max(last.abs());
        if !tail.is_finite() || (last.is_finite() && tail > last + tol) {
            return Err(PayoffError::BadTailSlope);
        }
        Ok(ConcavePayoff(PiecewiseLinear { tail, ..self.0 }))
    }

    pub fn as_piecewise(&self) -> &PiecewiseLinear<T> {
        &self.0
    }

    pub fn eval(&self, x: T) -> Result<T, PayoffError> {
        self.0.eval(x)
    }

    pub fn right_derivative(&self, x: T) -> Result<T, PayoffError> {
        self.0.right_derivative(x)
    }
}

/// Output of [`concavify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Concavified<T> {
    pub payoff: ConcavePayoff<T>,
    /// Largest slope increase found in the input.
    pub max_violation: T,
}

impl<T: Real> Concavified<T> {
    /// Violations this large point to an upstream bug rather than roundoff.
    pub fn is_suspicious(&self) -> bool {
        self.max_violation > lit(1e-6)
    }
}

/// Least concave majorant of the sampled points.
///
/// Pools adjacent slope violators, weighting each slope by its interval width;
/// block endpoints keep their input values, interior points are moved onto the
/// pooled chord. Slope rises within rounding error are left alone so the map is
/// exactly idempotent. The tail slope is the last pooled slope.
pub fn concavify<T: Real>(samples: &[(T, T)]) -> Result<Concavified<T>, PayoffError> {
    let (xs, ys): (Vec<T>, Vec<T>) = samples.iter().copied().unzip();
    check_knots(&xs, &ys)?;
    let n = xs.len();
    if n == 1 {
        let payoff = ConcavePayoff(PiecewiseLinear::new(xs, ys, T::zero())?);
        return Ok(Concavified { payoff, max_violation: T::zero() });
    }
    let chord = |i: usize, j: usize| (ys[j] - ys[i]) / (xs[j] - xs[i]);
    // slope rise explainable by rounding of the three values involved
    let noise = |i: usize, j: usize, k: usize, sa: T, sb: T| {
        let ymax = ys[i].abs().max(ys[j].abs()).max(ys[k].abs());
        let inv = T::one() / (xs[j] - xs[i]) + T::one() / (xs[k] - xs[j]);
        T::epsilon() * lit(16.0) * (ymax * inv + sa.abs() + sb.abs())
    };

    // blocks: (first knot index, last knot index); slope = chord of the block
    let mut blocks: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut max_violation = T::zero();
    for k in 0..n - 1 {
        blocks.push((k, k + 1));
        while blocks.len() > 1 {
            let (a0, a1) = blocks[blocks.len() - 2];
            let (b0, b1) = blocks[blocks.len() - 1];
            let (sa, sb) = (chord(a0, a1), chord(b0, b1));
            if sb - sa > noise(a0, a1, b1, sa, sb) {
                max_violation = max_violation.max(sb - sa);
                blocks.pop();
                blocks.pop();
                blocks.push((a0, b1));
            } else {
                break;
            }
        }
    }
    let mut out = ys.clone();
    for &(i, j) in &blocks {
        if j > i + 1 {
            let s = chord(i, j);
            for k in i + 1..j {
                out[k] = ys[i] + s * (xs[k] - xs[i]);
            }
        }
    }
    let (i, j) = *blocks.last().expect("nonempty");
    let tail = chord(i, j);
    let pw = PiecewiseLinear::new(xs, out, tail)?;
    Ok(Concavified { payoff: ConcavePayoff(pw), max_violation })
}
