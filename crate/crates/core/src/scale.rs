//! q-scale functions of a spectrally positive Lévy process.
//!
//! For the rational Laplace exponents of [`LevySpec`], `1/(ψ(s) − q)` has only
//! simple real poles `s_j` (the roots of `ψ(s) = q`), so
//!
//! ```text
//! W_q(x) = Σ_j c_j e^{s_j x},   c_j = 1/ψ′(s_j),   x ≥ 0
//! ```
//!
//! and `Z_q`, `Z̄_q` and the derivatives of `W_q` follow by termwise
//! integration or differentiation.
//!
//! The roots interlace with the poles `−μ_k` of ψ: one root is `Φ(q) > 0`, one
//! lies in `(−μ_(1), 0)`, one between each pair of consecutive poles and, when
//! `σ > 0`, one more below the smallest pole. Each is bracketed and polished
//! separately, which accounts for all `m + 2` (or `m + 1` when `σ = 0`) roots
//! of the cleared polynomial.

use thiserror::Error;

use crate::levy::{LevyError, LevySpec};
use crate::quadrature;
use crate::roots::{bisect, safeguarded_newton};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error("near-multiple roots (gap {0:e})")]
    NearMultipleRoots(f64),
    #[error("complex roots: could not bracket a real root in ({0}, {1})")]
    ComplexRoots(f64, f64),
    #[error("overflow horizon exceeded: x = {x} > {horizon}")]
    OverflowHorizon { x: f64, horizon: f64 },
    #[error("argument must be positive")]
    NonPositiveArgument,
    #[error("s must exceed Φ(q) = {0}")]
    BelowPhi(f64),
}

/// Root/residue representation of `W_q` for one fixed `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEvaluator<T> {
    q: T,
    roots: Vec<T>,
    residues: Vec<T>,
    w_at_zero: T,
    horizon: T,
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Finds the unique root of `g` in the open interval `(left, right)` where `g`
/// is positive near `left` and negative near `right`. `None` marks an infinite end.
fn root_in_interval<T: Real>(
    g: &impl Fn(T) -> T,
    dg: &impl Fn(T) -> T,
    left: Option<T>,
    right: T,
    right_is_pole: bool,
) -> Result<T, ScaleError> {
    let fail = || ScaleError::ComplexRoots(left.map_or(f64::NEG_INFINITY, to_f64), to_f64(right));
    let scale = match left {
        Some(l) => right - l,
        None => T::one().max(right.abs()),
    };
    let two = lit::<T>(2.0);
    // step in from the right end until g < 0
    let mut hi = right;
    if right_is_pole || !(g(right) < T::zero()) {
        let width = match left {
            Some(l) => right - l,
            None => scale,
        };
        let mut step = width / two;
        let mut found = false;
        for _ in 0..1100 {
            let cand = right - step;
            if cand >= right {
                break;
            }
            if g(cand) < T::zero() {
                hi = cand;
                found = true;
                break;
            }
            step = step / two;
        }
        if !found {
            return Err(fail());
        }
    }
    // step in from the left end (or outwards to −∞) until g > 0
    let lo = match left {
        Some(l) => {
            let mut step = (hi - l) / two;
            let mut lo = None;
            for _ in 0..1100 {
                let cand = l + step;
                if cand <= l {
                    break;
                }
                if g(cand) > T::zero() {
                    lo = Some(cand);
                    break;
                }
                step = step / two;
            }
            lo.ok_or_else(fail)?
        }
        None => {
            let mut dist = scale;
            let mut lo = None;
            for _ in 0..2000 {
                let cand = hi - dist;
                if !cand.is_finite() {
                    break;
                }
                if g(cand) > T::zero() {
                    lo = Some(cand);
                    break;
                }
                dist = dist * two;
            }
            lo.ok_or_else(fail)?
        }
    };
    let xtol = T::epsilon() * lit(4.0) * (T::one() + lo.abs().max(hi.abs()));
    let r = safeguarded_newton(g, dg, lo, hi, xtol, T::zero(), 400);
    if r.is_finite() && r > lo.min(hi) && r < lo.max(hi) {
        Ok(r)
    } else {
        Ok(bisect(g, lo, hi, 2000))
    }
}

impl<T: Real> ScaleEvaluator<T> {
    /// Builds the exponential-sum representation of `W_q`.
    pub fn new(spec: &LevySpec<T>, q: T) -> Result<Self, ScaleError> {
        spec.validate()?;
        let phi_q = spec.phi_inverse(q)?;
        let g = |s: T| spec.psi_extended(s) - q;
        let dg = |s: T| spec.psi_prime_extended(s);

        let mut roots = vec![phi_q];
        let mut poles: Vec<T> = if spec.has_jumps() {
            spec.jump_mix.iter().map(|c| -c.rate).collect()
        } else {
            Vec::new()
        };
        // descending: −μ_(1) > −μ_(2) > ...
        poles.sort_by(|a, b| b.partial_cmp(a).expect("finite poles"));

        let mut right = T::zero();
        let mut right_is_pole = false;
        for &p in &poles {
            roots.push(root_in_interval(&g, &dg, Some(p), right, right_is_pole)?);
            right = p;
            right_is_pole = true;
        }
        if spec.sigma > T::zero() {
            roots.push(root_in_interval(&g, &dg, None, right, right_is_pole)?);
        }

        let gap_tol = lit::<T>(1e-9) * (T::one() + phi_q.abs());
        let min_gap = roots
            .windows(2)
            .map(|w| (w[0] - w[1]).abs())
            .fold(T::infinity(), |m, d| m.min(d));
        if min_gap <= gap_tol {
            return Err(ScaleError::NearMultipleRoots(to_f64(min_gap)));
        }
        let mut residues = Vec::with_capacity(roots.len());
        for &s in &roots {
            residues.push(T::one() / spec.psi_prime_extended(s));
        }
        let w_at_zero = residues.iter().fold(T::zero(), |a, &c| a + c);
        Ok(ScaleEvaluator {
            q,
            horizon: T::exp_limit() / phi_q,
            roots,
            residues,
            w_at_zero,
        })
    }

    pub fn q(&self) -> T {
        self.q
    }

    /// Roots of `ψ(s) = q`, descending; `roots()[0] = Φ(q)`.
    pub fn roots(&self) -> &[T] {
        &self.roots
    }

    /// `c_j = 1/ψ′(s_j)`, aligned with [`Self::roots`].
    pub fn residues(&self) -> &[T] {
        &self.residues
    }

    pub fn phi_q(&self) -> T {
        self.roots[0]
    }

    /// `W_q(0+)`.
    pub fn w_at_zero(&self) -> T {
        self.w_at_zero
    }

    /// Largest `x` for which `W_q(x)` is representable.
    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn check_horizon(&self, x: T) -> Result<(), ScaleError> {
        if x > self.horizon {
            return Err(ScaleError::OverflowHorizon { x: to_f64(x), horizon: to_f64(self.horizon) });
        }
        Ok(())
    }

    #[inline]
    fn terms(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.roots.iter().copied().zip(self.residues.iter().copied())
    }

    /// `W_q(x)`; zero for `x < 0`.
    pub fn w(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        self.terms().fold(T::zero(), |a, (s, c)| a + c * (s * x).exp())
    }

    /// `e^{−ux} W_q(x)` evaluated without forming `W_q(x)`, for `u ≥ 0`.
    pub fn w_discounted(&self, x: T, u: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        self.terms().fold(T::zero(), |a, (s, c)| a + c * ((s - u) * x).exp())
    }

    /// `W_q′(x)` for `x > 0`.
    pub fn w_deriv(&self, x: T) -> Result<T, ScaleError> {
        if !(x > T::zero()) {
            return Err(ScaleError::NonPositiveArgument);
        }
        Ok(self.w_prime(x))
    }

    /// `Σ c_j s_j e^{s_j x}`; at `x = 0` this is the right limit `W_q′(0+)`.
    pub(crate) fn w_prime(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        self.terms().fold(T::zero(), |a, (s, c)| a + c * s * (s * x).exp())
    }

    /// `W_q″(x)` (right limit at 0).
    pub fn w_second(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        self.terms().fold(T::zero(), |a, (s, c)| a + c * s * s * (s * x).exp())
    }

    /// `Z_q(x) = 1 + q ∫₀ˣ W_q`.
    pub fn z(&self, x: T) -> T {
        if x <= T::zero() {
            return T::one();
        }
        let sum = self.terms().fold(T::zero(), |a, (s, c)| a + c / s * (s * x).exp_m1());
        T::one() + self.q * sum
    }

    /// `Z̄_q(x) = ∫₀ˣ Z_q`.
    pub fn zbar(&self, x: T) -> T {
        if x <= T::zero() {
            return x;
        }
        let sum = self
            .terms()
            .fold(T::zero(), |a, (s, c)| a + c / s * ((s * x).exp_m1() / s - x));
        x + self.q * sum
    }

    /// Smallest `x ≥ 0` with `Z_q(x) = level` (`level ≥ 1`).
    pub fn z_inverse(&self, level: T) -> Result<T, ScaleError> {
        if !(level >= T::one()) {
            return Err(ScaleError::NonPositiveArgument);
        }
        if level == T::one() {
            return Ok(T::zero());
        }
        let mut hi = T::one();
        while !(self.z(hi) > level) {
            hi = hi * lit(2.0);
            self.check_horizon(hi)?;
        }
        let xtol = T::epsilon() * lit(4.0) * hi;
        Ok(safeguarded_newton(
            |x| self.z(x) - level,
            |x| self.q * self.w(x),
            T::zero(),
            hi,
            xtol,
            T::zero(),
            400,
        ))
    }

    /// Relative error between a numerical `∫₀^horizon e^{−sx} W_q(x) dx` and
    /// `1/(ψ(s) − q)`.
    pub fn verify_laplace_transform(&self, spec: &LevySpec<T>, s: T, horizon: T) -> Result<T, ScaleError> {
        if !(s > self.phi_q()) {
            return Err(ScaleError::BelowPhi(to_f64(self.phi_q())));
        }
        let exact = T::one() / (spec.psi_extended(s) - self.q);
        // split the range so each piece sees a bounded amount of decay
        let gap = s - self.phi_q();
        let n = (gap * horizon / lit(2.0)).ceil().to_usize().unwrap_or(1).clamp(1, 4000);
        let step = horizon / T::from_usize(n).expect("usize");
        let points: Vec<T> = (0..=n).map(|k| T::from_usize(k).expect("usize") * step).collect();
        let tol = T::epsilon() * lit(64.0);
        let num = quadrature::integrate_split(|x| self.w_discounted(x, s), &points, tol.max(lit(1e-13)), T::zero());
        Ok(((num - exact) / exact).abs())
    }
}
