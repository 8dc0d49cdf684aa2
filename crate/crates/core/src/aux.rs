//! Single-regime problem: dividends above `b`, injections below 0, killing at
//! rate λ with terminal payoff ω, discounting at δ.
//!
//! With `q = δ + λ` and piecewise-constant `ω′`, every integral of `ω′` against
//! `W_q`, `Z_q` reduces to differences of `Z_q`, `Z̄_q` per payoff segment, so
//! the solver itself does no quadrature.

use thiserror::Error;

use crate::levy::LevySpec;
use crate::payoff::{ConcavePayoff, PayoffError, PiecewiseLinear, Segment};
use crate::quadrature;
use crate::roots::safeguarded_newton;
use crate::scalar::{lit, Real};
use crate::scale::{ScaleError, ScaleEvaluator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuxError {
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error("lambda must be nonnegative")]
    NegativeLambda,
    #[error("delta must be positive")]
    NonPositiveDelta,
    #[error("phi must exceed 1")]
    PhiTooSmall,
    #[error("payoff slope at 0+ ({0}) exceeds phi")]
    PayoffSlopeAbovePhi(f64),
    #[error("no sign change within overflow horizon")]
    NoSignChange,
    #[error("barrier must be positive")]
    NonPositiveBarrier,
    #[error("x = {0} outside [0, b]")]
    OutsideBand(f64),
    #[error("x must be positive")]
    NonPositiveArgument,
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Validated inputs of the single-regime problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxProblem<T> {
    pub spec: LevySpec<T>,
    pub lambda: T,
    pub delta: T,
    pub phi: T,
    pub payoff: ConcavePayoff<T>,
}

impl<T: Real> AuxProblem<T> {
    pub fn new(spec: LevySpec<T>, lambda: T, delta: T, phi: T, payoff: ConcavePayoff<T>) -> Result<Self, AuxError> {
        spec.validate().map_err(ScaleError::from)?;
        check_rates(lambda, delta, phi)?;
        let d0 = payoff.right_derivative(T::zero())?;
        if d0 > phi {
            return Err(AuxError::PayoffSlopeAbovePhi(f64_of(d0)));
        }
        Ok(AuxProblem { spec, lambda, delta, phi, payoff })
    }

    pub fn q(&self) -> T {
        self.delta + self.lambda
    }

    pub fn context(&self) -> Result<AuxContext<T>, AuxError> {
        AuxContext::new(self.spec.clone(), self.lambda, self.delta, self.phi, self.payoff.as_piecewise().clone())
    }

    /// Finds `b^ω` and packages the solution.
    pub fn solve(&self) -> Result<AuxSolution<T>, AuxError> {
        let ctx = self.context()?;
        let barrier = ctx.barrier_root(None)?;
        Ok(AuxSolution { problem: self.clone(), ctx, barrier })
    }
}

fn check_rates<T: Real>(lambda: T, delta: T, phi: T) -> Result<(), AuxError> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(AuxError::NegativeLambda);
    }
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(AuxError::NonPositiveDelta);
    }
    if !(phi > T::one()) || !phi.is_finite() {
        return Err(AuxError::PhiTooSmall);
    }
    Ok(())
}

/// Scale functions plus a payoff, ready for ℓ, the barrier search and value
/// evaluation. The payoff need not be concave here.
#[derive(Debug, Clone)]
pub struct AuxContext<T> {
    spec: LevySpec<T>,
    ev: ScaleEvaluator<T>,
    payoff: PiecewiseLinear<T>,
    lambda: T,
    phi: T,
    // ∫₀^{x_k} ω′ W_q at each payoff knot
    iw_knots: Vec<T>,
}

impl<T: Real> AuxContext<T> {
    pub fn new(spec: LevySpec<T>, lambda: T, delta: T, phi: T, payoff: PiecewiseLinear<T>) -> Result<Self, AuxError> {
        check_rates(lambda, delta, phi)?;
        let ev = ScaleEvaluator::new(&spec, delta + lambda)?;
        Self::with_evaluator(spec, ev, lambda, phi, payoff)
    }

    /// Reuses an evaluator built for `q = δ + λ`.
    pub fn with_evaluator(
        spec: LevySpec<T>,
        ev: ScaleEvaluator<T>,
        lambda: T,
        phi: T,
        payoff: PiecewiseLinear<T>,
    ) -> Result<Self, AuxError> {
        if !(lambda >= T::zero()) {
            return Err(AuxError::NegativeLambda);
        }
        if !(phi > T::one()) {
            return Err(AuxError::PhiTooSmall);
        }
        let q = ev.q();
        let xs = payoff.xs();
        let mut iw_knots = Vec::with_capacity(xs.len());
        iw_knots.push(T::zero());
        let mut z_prev = T::one();
        for k in 0..xs.len() - 1 {
            let z_next = ev.z(xs[k + 1]);
            let prev = iw_knots[k];
            iw_knots.push(prev + payoff.slopes()[k] * (z_next - z_prev) / q);
            z_prev = z_next;
        }
        Ok(AuxContext { spec, ev, payoff, lambda, phi, iw_knots })
    }

    pub fn evaluator(&self) -> &ScaleEvaluator<T> {
        &self.ev
    }

    pub fn payoff(&self) -> &PiecewiseLinear<T> {
        &self.payoff
    }

    pub fn spec(&self) -> &LevySpec<T> {
        &self.spec
    }

    pub fn q(&self) -> T {
        self.ev.q()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    /// `∫₀ˣ ω′₊(y) W_q(y) dy`.
    fn integral_w(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let k = self.payoff.segment_index(x);
        let xk = self.payoff.xs()[k];
        self.iw_knots[k] + self.payoff.slope_of(k) * (self.ev.z(x) - self.ev.z(xk)) / self.q()
    }

    /// `ℓ(x) = Z_q(x) − λ ∫₀ˣ ω′₊ W_q − φ`.
    pub fn ell(&self, x: T) -> T {
        self.ev.z(x) - self.lambda * self.integral_w(x) - self.phi
    }

    /// `ℓ′(x) = W_q(x)(q − λ ω′₊(x))`, right derivative at knots.
    pub fn ell_deriv(&self, x: T) -> T {
        let x = x.max(T::zero());
        let slope = self.payoff.slope_of(self.payoff.segment_index(x));
        self.ev.w(x) * (self.q() - self.lambda * slope)
    }

    /// Zero of ℓ above `Z_q⁻¹(φ)`, optionally starting near `hint`.
    pub fn barrier_root(&self, hint: Option<T>) -> Result<T, AuxError> {
        let map_horizon = |e: ScaleError| match e {
            ScaleError::OverflowHorizon { .. } => AuxError::NoSignChange,
            other => AuxError::Scale(other),
        };
        let (lo, hi) = match hint.filter(|h| h.is_finite() && *h > T::zero()) {
            Some(h) => self.bracket_near(h).map_err(map_horizon)?,
            None => {
                let start = self.ev.z_inverse(self.phi).map_err(map_horizon)?;
                let l0 = self.ell(start);
                if l0 == T::zero() {
                    return Ok(start);
                }
                if l0 > T::zero() {
                    (T::zero(), start)
                } else {
                    self.expand_up(start, start.max(T::one())).map_err(map_horizon)?
                }
            }
        };
        let xtol = T::epsilon() * lit(2.0) * hi;
        let b = safeguarded_newton(|x| self.ell(x), |x| self.ell_deriv(x), lo, hi, xtol, T::zero(), 500);
        Ok(b)
    }

    /// From `lo` with `ℓ(lo) ≤ 0`, double the step until ℓ turns positive.
    fn expand_up(&self, lo: T, step0: T) -> Result<(T, T), ScaleError> {
        let mut lo = lo;
        let mut step = step0;
        loop {
            let hi = lo + step;
            self.ev.check_horizon(hi)?;
            if self.ell(hi) > T::zero() {
                return Ok((lo, hi));
            }
            lo = hi;
            step = step * lit(2.0);
        }
    }

    fn bracket_near(&self, h: T) -> Result<(T, T), ScaleError> {
        let step0 = h * lit(1e-3);
        if self.ell(h) <= T::zero() {
            return self.expand_up(h, step0);
        }
        let mut step = step0;
        let mut hi = h;
        loop {
            let lo = (hi - step).max(T::zero());
            // ℓ(0) = 1 − φ < 0 ends the search
            if lo == T::zero() || self.ell(lo) <= T::zero() {
                return Ok((lo, hi));
            }
            hi = lo;
            step = step * lit(2.0);
        }
    }

    /// Precomputes the constants of the value function for barrier `b`.
    pub fn at_barrier(&self, b: T) -> Result<BarrierValue<'_, T>, AuxError> {
        if !(b > T::zero()) {
            return Err(AuxError::NonPositiveBarrier);
        }
        self.ev.check_horizon(b)?;
        let segs = self.payoff.segments_until(b);
        let wb = self.ev.w(b);
        let ell_b = self.ell(b);
        let mut bv = BarrierValue { ctx: self, b, wb, ell_b, segs, v_zero: T::zero(), v_b: T::zero() };
        bv.v_zero = bv.value_inside(T::zero());
        bv.v_b = bv.value_inside(b);
        Ok(bv)
    }
}

/// Value function `V_{0,b}` of the strategy reflecting at 0 and `b`.
#[derive(Debug, Clone)]
pub struct BarrierValue<'a, T> {
    ctx: &'a AuxContext<T>,
    b: T,
    wb: T,
    ell_b: T,
    segs: Vec<Segment<T>>,
    v_zero: T,
    v_b: T,
}

/// `Σ a_k (F(β_k − x) − F(α_k − x))` for `F = Z̄, Z, W`.
#[derive(Debug, Clone, Copy)]
struct SegmentSums<T> {
    zbar: T,
    z: T,
    w: T,
}

impl<'a, T: Real> BarrierValue<'a, T> {
    pub fn barrier(&self) -> T {
        self.b
    }

    pub fn context(&self) -> &'a AuxContext<T> {
        self.ctx
    }

    fn sums_direct(&self, x: T) -> SegmentSums<T> {
        let ev = &self.ctx.ev;
        let mut s = SegmentSums { zbar: T::zero(), z: T::zero(), w: T::zero() };
        for seg in &self.segs {
            let (hi, lo) = (seg.end - x, seg.start - x);
            s.zbar = s.zbar + seg.slope * (ev.zbar(hi) - ev.zbar(lo));
            s.z = s.z + seg.slope * (ev.z(hi) - ev.z(lo));
            s.w = s.w + seg.slope * (ev.w(hi) - ev.w(lo));
        }
        s
    }

    fn value_from(&self, x: T, s: &SegmentSums<T>) -> T {
        let ctx = self.ctx;
        let (ev, q) = (&ctx.ev, ctx.q());
        let u = self.b - x;
        -ev.zbar(u)
            + ctx.spec.mean() / q
            + ctx.lambda / q * (ctx.payoff.value_at_zero() + s.zbar)
            + ev.z(u) * self.ell_b / (q * self.wb)
    }

    fn derivative_from(&self, x: T, s: &SegmentSums<T>) -> T {
        let ctx = self.ctx;
        let (ev, q) = (&ctx.ev, ctx.q());
        let u = self.b - x;
        -ev.w(u) / self.wb * self.ell_b + ev.z(u) - ctx.lambda / q * s.z
    }

    fn value_inside(&self, x: T) -> T {
        self.value_from(x, &self.sums_direct(x))
    }

    /// `V_{0,b}(x)` for any real `x`.
    pub fn value(&self, x: T) -> T {
        if x < T::zero() {
            self.ctx.phi * x + self.v_zero
        } else if x > self.b {
            x - self.b + self.v_b
        } else {
            self.value_inside(x)
        }
    }

    /// `V′(x)` on `[0, b]`.
    pub fn derivative(&self, x: T) -> Result<T, AuxError> {
        if !(x >= T::zero() && x <= self.b) {
            return Err(AuxError::OutsideBand(f64_of(x)));
        }
        Ok(self.derivative_from(x, &self.sums_direct(x)))
    }

    /// `V″(x)` on `[0, b]` (one-sided at payoff knots).
    pub fn second_derivative(&self, x: T) -> Result<T, AuxError> {
        if !(x >= T::zero() && x <= self.b) {
            return Err(AuxError::OutsideBand(f64_of(x)));
        }
        let ctx = self.ctx;
        let ev = &ctx.ev;
        let u = self.b - x;
        let s = self.sums_direct(x);
        Ok(ev.w_prime(u) / self.wb * self.ell_b - ctx.q() * ev.w(u) + ctx.lambda * s.w)
    }

    /// Values and first derivatives at ascending points, in `O(n + segments)`
    /// exponentials instead of `O(n · segments)`.
    pub fn sweep(&self, xs: &[T]) -> Vec<(T, T)> {
        let ev = &self.ctx.ev;
        let roots = ev.roots();
        let residues = ev.residues();
        let q = self.ctx.q();
        let nseg = self.segs.len();
        // below[k] = Σ_{k' < k} a (β − α)
        let mut below = Vec::with_capacity(nseg + 1);
        below.push(T::zero());
        for seg in &self.segs {
            let last = *below.last().expect("nonempty");
            below.push(last + seg.slope * (seg.end - seg.start));
        }
        let mut out = vec![(T::zero(), T::zero()); xs.len()];
        // acc[j] = Σ over included segments of a (e^{s_j(β−x)} − e^{s_j(α−x)})
        let mut acc = vec![T::zero(); roots.len()];
        let mut lin_above = T::zero();
        let mut first = nseg;
        let mut xc = self.b;
        for (idx, &x) in xs.iter().enumerate().rev() {
            if x < T::zero() {
                out[idx] = (self.ctx.phi * x + self.v_zero, self.ctx.phi);
                continue;
            }
            if x > self.b {
                out[idx] = (x - self.b + self.v_b, T::one());
                continue;
            }
            if x < xc {
                for (a, &s) in acc.iter_mut().zip(roots) {
                    *a = *a * (s * (xc - x)).exp();
                }
                xc = x;
            }
            while first > 0 && self.segs[first - 1].start >= x {
                first -= 1;
                let seg = self.segs[first];
                for (a, &s) in acc.iter_mut().zip(roots) {
                    *a = *a + seg.slope * (s * (seg.start - x)).exp() * (s * (seg.end - seg.start)).exp_m1();
                }
                lin_above = lin_above + seg.slope * (seg.end - seg.start);
            }
            let mut sums = SegmentSums { zbar: T::zero(), z: T::zero(), w: T::zero() };
            let mut lin_below = below[first];
            if first > 0 && self.segs[first - 1].end > x {
                let seg = self.segs[first - 1];
                lin_below = below[first - 1];
                let u = seg.end - x;
                sums.zbar = seg.slope * (ev.zbar(u) - (seg.start - x));
                sums.z = seg.slope * (ev.z(u) - T::one());
                sums.w = seg.slope * ev.w(u);
            }
            let mut exp_zbar = T::zero();
            let mut exp_z = T::zero();
            let mut exp_w = T::zero();
            for ((&a, &s), &c) in acc.iter().zip(roots).zip(residues) {
                exp_zbar = exp_zbar + c / s * (a / s - lin_above);
                exp_z = exp_z + c / s * a;
                exp_w = exp_w + c * a;
            }
            sums.zbar = sums.zbar + lin_below + lin_above + q * exp_zbar;
            sums.z = sums.z + q * exp_z;
            sums.w = sums.w + exp_w;
            out[idx] = (self.value_from(x, &sums), self.derivative_from(x, &sums));
        }
        out
    }

    /// `(𝒜 − q)V(x) + λω(x)` for `x > 0`; at `x = b` the left limit.
    pub fn hjb_residual(&self, x: T) -> Result<T, AuxError> {
        if !(x > T::zero()) {
            return Err(AuxError::NonPositiveArgument);
        }
        let ctx = self.ctx;
        let spec = &ctx.spec;
        let q = ctx.q();
        let omega = ctx.payoff.at(x);
        if x > self.b {
            return Ok(spec.mean() - q * self.value(x) + ctx.lambda * omega);
        }
        let v = self.value_inside(x);
        let half = lit::<T>(0.5);
        let mut gen = spec.drift_mu * self.derivative(x)? + half * spec.sigma * spec.sigma * self.second_derivative(x)?;
        if spec.has_jumps() {
            let reach = self.b - x;
            let density = |z: T| {
                spec.jump_mix.iter().fold(T::zero(), |a, c| a + c.weight * c.rate * (-c.rate * z).exp())
            };
            let mut points = vec![T::zero()];
            for &k in ctx.payoff.xs() {
                let d = k - x;
                if d > T::zero() && d < reach {
                    points.push(d);
                }
            }
            points.push(reach);
            let tol = lit::<T>(1e-9).max(T::epsilon() * lit(64.0));
            let abs = T::epsilon() * (T::one() + v.abs());
            let inner = if reach > T::zero() {
                quadrature::integrate_split(|z| (self.value_inside(x + z) - v) * density(z), &points, tol, abs)
            } else {
                T::zero()
            };
            let tail = spec.jump_mix.iter().fold(T::zero(), |a, c| {
                a + c.weight * (-c.rate * reach).exp() * (self.v_b - v + T::one() / c.rate)
            });
            gen = gen + spec.jump_rate * (inner + tail);
        }
        Ok(gen - q * v + ctx.lambda * omega)
    }
}

/// `b^ω` together with its problem.
#[derive(Debug, Clone)]
pub struct AuxSolution<T> {
    problem: AuxProblem<T>,
    ctx: AuxContext<T>,
    barrier: T,
}

impl<T: Real> AuxSolution<T> {
    pub fn barrier(&self) -> T {
        self.barrier
    }

    pub fn problem(&self) -> &AuxProblem<T> {
        &self.problem
    }

    pub fn context(&self) -> &AuxContext<T> {
        &self.ctx
    }

    pub fn evaluator(&self) -> &ScaleEvaluator<T> {
        &self.ctx.ev
    }

    pub fn optimal(&self) -> BarrierValue<'_, T> {
        self.ctx.at_barrier(self.barrier).expect("barrier validated by the root search")
    }

    pub fn at_barrier(&self, b: T) -> Result<BarrierValue<'_, T>, AuxError> {
        self.ctx.at_barrier(b)
    }

    pub fn value(&self, x: T) -> T {
        self.optimal().value(x)
    }

    pub fn value_derivative(&self, x: T) -> Result<T, AuxError> {
        self.optimal().derivative(x)
    }

    pub fn hjb_residual(&self, x: T) -> Result<T, AuxError> {
        self.optimal().hjb_residual(x)
    }

    /// `V_{0,b^ω}(x) − V_{0,b}(x)` on `grid`.
    pub fn dominance_gap(&self, b: T, grid: &[T]) -> Result<Vec<T>, AuxError> {
        let opt = self.optimal();
        let other = self.ctx.at_barrier(b)?;
        Ok(grid.iter().map(|&x| opt.value(x) - other.value(x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpComponent;

    fn sinh_problem(lambda: f64, payoff: ConcavePayoff<f64>) -> AuxProblem<f64> {
        // σ² = 2, μ = 0, q = 1 makes W_q = sinh, Z_q = cosh
        let spec = LevySpec::brownian(0.0, 2f64.sqrt()).unwrap();
        AuxProblem::new(spec, lambda, 1.0 - lambda, 2.0, payoff).unwrap()
    }

    fn mixed_problem() -> AuxProblem<f64> {
        let spec = LevySpec::new(
            -0.5,
            0.4,
            1.5,
            vec![JumpComponent { weight: 0.7, rate: 1.5 }, JumpComponent { weight: 0.3, rate: 4.0 }],
        )
        .unwrap();
        let payoff = ConcavePayoff::new(&[(0.0, 0.2), (0.5, 1.0), (1.5, 1.9)], 0.6).unwrap();
        AuxProblem::new(spec, 0.4, 0.1, 1.8, payoff).unwrap()
    }

    fn cl_problem(lambda: f64) -> AuxProblem<f64> {
        let spec = LevySpec::cramer_lundberg(-1.0, 1.0, 1.0).unwrap();
        let payoff = ConcavePayoff::new(&[(0.0, 0.0), (1.0, 1.2), (3.0, 2.0)], 0.3).unwrap();
        AuxProblem::new(spec, lambda, 0.3, 1.5, payoff).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = LevySpec::brownian(0.0, 1.0).unwrap();
        let id = ConcavePayoff::identity();
        assert_eq!(AuxProblem::new(spec.clone(), 0.1, 0.1, 1.0, id.clone()).unwrap_err(), AuxError::PhiTooSmall);
        assert_eq!(AuxProblem::new(spec.clone(), -0.1, 0.1, 2.0, id.clone()).unwrap_err(), AuxError::NegativeLambda);
        assert_eq!(AuxProblem::new(spec.clone(), 0.1, 0.0, 2.0, id).unwrap_err(), AuxError::NonPositiveDelta);
        let steep = ConcavePayoff::new(&[(0.0, 0.0), (1.0, 3.0)], 1.0).unwrap();
        assert!(matches!(AuxProblem::new(spec, 0.1, 0.1, 2.0, steep), Err(AuxError::PayoffSlopeAbovePhi(_))));
    }

    #[test]
    fn classical_barrier_is_arccosh() {
        let sol = sinh_problem(0.0, ConcavePayoff::identity()).solve().unwrap();
        let b = sol.barrier();
        assert!((b - 2f64.acosh()).abs() < 1e-12);
        assert!(sol.context().ell(2f64.acosh()).abs() < 1e-10);
        assert_eq!(sol.context().ell(0.0), -1.0);
        assert!((sol.value(0.0) + 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn linear_branches() {
        let sol = mixed_problem().solve().unwrap();
        let b = sol.barrier();
        let opt = sol.optimal();
        assert!((sol.value(-1.0) - (-1.8 + sol.value(0.0))).abs() < 1e-14);
        let d = opt.value(b) - opt.value(b - 1e-9);
        assert!((d - 1e-9).abs() < 1e-14);
        assert!((opt.value(b + 2.0) - opt.value(b) - 2.0).abs() < 1e-12);
        assert!(matches!(opt.derivative(b + 0.1), Err(AuxError::OutsideBand(_))));
    }

    #[test]
    fn smooth_fit_and_slope_window() {
        for prob in [mixed_problem(), cl_problem(0.5), sinh_problem(0.5, ConcavePayoff::identity())] {
            let sol = prob.solve().unwrap();
            let b = sol.barrier();
            assert!(sol.context().ell(b).abs() < 1e-12);
            let z_inv = sol.evaluator().z_inverse(prob.phi).unwrap();
            assert!(b > z_inv);
            assert!((sol.value_derivative(b).unwrap() - 1.0).abs() < 1e-8);
            assert!((sol.value_derivative(0.0).unwrap() - prob.phi).abs() < 1e-8);
            let mut prev = f64::INFINITY;
            for k in 0..=200 {
                let x = b * k as f64 / 200.0;
                let d = sol.value_derivative(x).unwrap();
                assert!(d >= 1.0 - 1e-9 && d <= prob.phi + 1e-9, "slope {d} at {x}");
                assert!(d <= prev + 1e-9);
                prev = d;
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let sol = mixed_problem().solve().unwrap();
        let b = sol.barrier();
        for bb in [b, 0.6 * b, 1.7 * b] {
            let bv = sol.at_barrier(bb).unwrap();
            for k in 1..20 {
                let x = bb * k as f64 / 20.0;
                let h = 1e-5;
                let fd = (bv.value(x + h) - bv.value(x - h)) / (2.0 * h);
                assert!((fd - bv.derivative(x).unwrap()).abs() < 1e-6);
                let fd2 = (bv.derivative(x + h).unwrap() - bv.derivative(x - h).unwrap()) / (2.0 * h);
                if bv.context().payoff().xs().iter().all(|k| (k - x).abs() > 1e-3) {
                    assert!((fd2 - bv.second_derivative(x).unwrap()).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn ell_derivative_matches_finite_difference() {
        let prob = sinh_problem(0.4, ConcavePayoff::identity());
        let ctx = prob.context().unwrap();
        for x in [0.3, 1.0, 2.5] {
            let h = 1e-6;
            let fd = (ctx.ell(x + h) - ctx.ell(x - h)) / (2.0 * h);
            let expected = ctx.evaluator().w(x) * (prob.q() - prob.lambda);
            assert!((fd - expected).abs() < 1e-7);
            assert!((ctx.ell_deriv(x) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn sweep_matches_direct() {
        let sol = mixed_problem().solve().unwrap();
        let bv = sol.optimal();
        let b = sol.barrier();
        let xs: Vec<f64> = (-5..=140).map(|k| k as f64 * b / 120.0).collect();
        let swept = bv.sweep(&xs);
        for (&x, &(v, d)) in xs.iter().zip(&swept) {
            assert!((v - bv.value(x)).abs() < 1e-11 * (1.0 + v.abs()), "{x}");
            if (0.0..=b).contains(&x) {
                assert!((d - bv.derivative(x).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn payoff_weight_raises_barrier() {
        let classical = sinh_problem(0.0, ConcavePayoff::identity()).solve().unwrap();
        // same q, φ and spec, now with λ > 0
        let with_payoff = sinh_problem(0.3, ConcavePayoff::identity()).solve().unwrap();
        assert!(with_payoff.barrier() > classical.barrier());
        let a = cl_problem(0.0).solve().unwrap();
        let b = AuxProblem { lambda: 0.2, delta: 0.1, ..cl_problem(0.0) }.solve().unwrap();
        assert!(b.barrier() > a.barrier());
    }

    #[test]
    fn cramer_lundberg_classical_barrier_by_quadrature() {
        let prob = AuxProblem { delta: 1.0, phi: 2.0, ..cl_problem(0.0) };
        let sol = prob.solve().unwrap();
        let b = sol.barrier();
        let ev = sol.evaluator();
        let z_quad = 1.0 + quadrature::integrate(|y| ev.w(y), 0.0, b, 1e-14, 0.0);
        assert!((z_quad - 2.0).abs() < 1e-10);
    }

    #[test]
    fn dominance_gap_examples() {
        let sol = sinh_problem(0.0, ConcavePayoff::identity()).solve().unwrap();
        let b = sol.barrier();
        let g = sol.dominance_gap(b, &[0.0, 1.0, 3.0]).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        let g = sol.dominance_gap(2.0 * b, &[0.0, b, 2.0 * b]).unwrap();
        assert!(g.iter().all(|v| *v >= -1e-10));
        assert!(g.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        for prob in [mixed_problem(), cl_problem(0.5)] {
            let sol = prob.solve().unwrap();
            let b = sol.barrier();
            let grid: Vec<f64> = (-10..=100).map(|k| k as f64 * 0.05 * b).collect();
            for m in [0.25, 0.5, 2.0, 4.0] {
                let g = sol.dominance_gap(m * b, &grid).unwrap();
                assert!(g.iter().all(|v| *v >= -1e-9));
                assert!(g.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            }
        }
    }

    #[test]
    fn hjb_equation_holds() {
        for prob in [mixed_problem(), cl_problem(0.5)] {
            let sol = prob.solve().unwrap();
            let b = sol.barrier();
            for k in 1..=50 {
                let x = b * k as f64 / 50.0;
                let r = sol.hjb_residual(x).unwrap();
                assert!(r.abs() <= 1e-6 * (1.0 + sol.value(x).abs()), "residual {r} at {x}");
            }
            let q = prob.q();
            for k in 1..=20 {
                let x = b + 2.0 * b * k as f64 / 20.0;
                let r = sol.hjb_residual(x).unwrap();
                assert!(r <= 1e-8);
                let h = 1e-4;
                let slope = (sol.hjb_residual(x + h).unwrap() - sol.hjb_residual(x - h).unwrap()) / (2.0 * h);
                let expected = -q + prob.lambda * prob.payoff.right_derivative(x).unwrap();
                if prob.payoff.as_piecewise().xs().iter().all(|k| (k - x).abs() > 2.0 * h) {
                    assert!((slope - expected).abs() < 1e-6);
                }
            }
            assert_eq!(sol.hjb_residual(0.0), Err(AuxError::NonPositiveArgument));
        }
    }

    #[test]
    fn single_precision_barrier() {
        let spec = LevySpec::<f32>::brownian(0.0, 2f32.sqrt()).unwrap();
        let prob = AuxProblem::new(spec, 0.0, 1.0, 2.0, ConcavePayoff::identity()).unwrap();
        let b = prob.solve().unwrap().barrier();
        assert!((b - 2f32.acosh()).abs() < 1e-4);
    }
}
