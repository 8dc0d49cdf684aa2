//! Regime-switching problem: one spectrally positive Lévy process per state of
//! a finite Markov chain, a downward jump `J_ij ≤ 0` of the surplus at each
//! switch, a common injection cost φ.
//!
//! The value function is the fixed point of `T_sup`, which maps a field `f` to
//! the optimal single-regime value with terminal payoff `f̂(·, i)` at the first
//! switching time. `T_sup` contracts with factor `max_i λ_i/(λ_i + δ_i)`.
//!
//! Fields live on a uniform grid over `[0, x_max]` and are extended with slope
//! φ below 0 and slope 1 above `x_max`.

use thiserror::Error;

use crate::aux::{AuxContext, AuxError};
use crate::levy::{LevyError, LevySpec};
use crate::payoff::{concavify, ConcavePayoff, PayoffError, PiecewiseLinear};
use crate::scalar::{lit, Real};
use crate::scale::{ScaleError, ScaleEvaluator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no states")]
    NoStates,
    #[error("switch rate {0} -> {1} must be finite and nonnegative")]
    BadSwitchRate(usize, usize),
    #[error("state {0}: total switching rate must be positive")]
    NoSwitching(usize),
    #[error("state {0}: discount must be positive")]
    NonPositiveDiscount(usize),
    #[error("phi must exceed 1")]
    PhiTooSmall,
    #[error("switch jump {0} -> {1}: {2}")]
    BadJump(usize, usize, &'static str),
    #[error("state {0}: {1}")]
    Levy(usize, LevyError),
    #[error("f not in 𝓒: {0}")]
    NotInC(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("concavity violation {0:e} in hat operator")]
    ConcavityViolation(f64),
    #[error("no convergence: rho = {rho:e} after {iterations} iterations (decay ratio {ratio})")]
    NoConvergence { rho: f64, iterations: usize, ratio: f64 },
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Law of the surplus jump `J_ij` at a switch from `i` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub enum SwitchJump<T> {
    /// No jump (point mass at 0).
    None,
    /// `−J` hyperexponential with density `Σ w_m ν_m e^{−ν_m y}`.
    HyperExp { weights: Vec<T>, rates: Vec<T> },
}

impl<T: Real> SwitchJump<T> {
    /// `E|J|`.
    pub fn mean_size(&self) -> T {
        match self {
            SwitchJump::None => T::zero(),
            SwitchJump::HyperExp { weights, rates } => {
                let total = weights.iter().fold(T::zero(), |a, &w| a + w);
                weights.iter().zip(rates).fold(T::zero(), |a, (&w, &r)| a + w / r) / total
            }
        }
    }

    fn validate(&self) -> Result<(), &'static str> {
        let SwitchJump::HyperExp { weights, rates } = self else {
            return Ok(());
        };
        if weights.is_empty() || weights.len() != rates.len() {
            return Err("weights and rates must be nonempty and of equal length");
        }
        if weights.iter().any(|&w| !(w > T::zero() && w <= T::one())) {
            return Err("weights must lie in (0, 1]");
        }
        if rates.iter().any(|&r| !(r > T::zero()) || !r.is_finite()) {
            return Err("rates must be positive");
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if (total - T::one()).abs() > lit::<T>(1e-12).max(T::epsilon() * lit(8.0)) {
            return Err("weights sum ≠ 1");
        }
        Ok(())
    }
}

/// Validated regime-switching model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel<T> {
    pub states: Vec<String>,
    /// `switch_rates[i][j] = λ_ij`; the diagonal is ignored.
    pub switch_rates: Vec<Vec<T>>,
    pub discounts: Vec<T>,
    pub levy: Vec<LevySpec<T>>,
    pub switch_jumps: Vec<Vec<SwitchJump<T>>>,
    pub phi: T,
}

/// A function on `[0, ∞) × 𝓔` sampled on `x_k = k·h`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField<T> {
    step: T,
    values: Vec<Vec<T>>,
    phi: T,
}

impl<T: Real> ValueField<T> {
    /// Samples `f(x, i)` on `n` intervals over `[0, x_max]`.
    pub fn from_fn(x_max: T, n: usize, phi: T, states: usize, f: impl Fn(T, usize) -> T) -> Self {
        let step = x_max / T::from_usize(n).expect("usize");
        let values = (0..states)
            .map(|i| (0..=n).map(|k| f(T::from_usize(k).expect("usize") * step, i)).collect())
            .collect();
        ValueField { step, values, phi }
    }

    /// Wraps samples already on a grid of spacing `step`.
    pub fn from_values(step: T, phi: T, values: Vec<Vec<T>>) -> Result<Self, RegimeError> {
        let n = values.first().map_or(0, Vec::len);
        if n < 2 || values.iter().any(|v| v.len() != n) || !(step > T::zero()) {
            return Err(RegimeError::GridMismatch);
        }
        Ok(ValueField { step, values, phi })
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn intervals(&self) -> usize {
        self.values[0].len() - 1
    }

    pub fn x_max(&self) -> T {
        self.step * T::from_usize(self.intervals()).expect("usize")
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn grid(&self) -> Vec<T> {
        (0..=self.intervals()).map(|k| T::from_usize(k).expect("usize") * self.step).collect()
    }

    pub fn values(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    /// Interpolated value with the slope-φ / slope-1 extensions.
    pub fn eval(&self, x: T, i: usize) -> T {
        let v = &self.values[i];
        if x <= T::zero() {
            return self.phi * x + v[0];
        }
        let n = self.intervals();
        let top = self.x_max();
        if x >= top {
            return v[n] + (x - top);
        }
        let pos = x / self.step;
        let k = pos.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = pos - T::from_usize(k).expect("usize");
        v[k] + (v[k + 1] - v[k]) * t
    }

    /// Resamples onto a new grid through [`Self::eval`].
    pub fn regrid(&self, x_max: T, n: usize) -> Self {
        ValueField::from_fn(x_max, n, self.phi, self.states(), |x, i| self.eval(x, i))
    }

    /// Membership in 𝓒: per state concave on the grid with chord slopes in
    /// `[1 − tol, φ + tol]`.
    pub fn check_in_c(&self, tol: T) -> Result<(), RegimeError> {
        for (i, v) in self.values.iter().enumerate() {
            let mut prev = T::infinity();
            for (k, w) in v.windows(2).enumerate() {
                let s = (w[1] - w[0]) / self.step;
                if !(s >= T::one() - tol && s <= self.phi + tol) {
                    return Err(RegimeError::NotInC(format!("state {i}: slope {s} at grid index {k}")));
                }
                if s > prev + tol {
                    return Err(RegimeError::NotInC(format!("state {i}: not concave at grid index {k}")));
                }
                prev = s;
            }
        }
        Ok(())
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.step == other.step && self.states() == other.states() && self.intervals() == other.intervals()
    }
}

/// `ρ(f, g) = max_i sup_x |f(x, i) − g(x, i)|`.
///
/// Both extensions differ by the constants at the grid ends, which are grid
/// points themselves, so the supremum over the grid is the supremum over `ℝ`.
pub fn rho_metric<T: Real>(f: &ValueField<T>, g: &ValueField<T>) -> Result<T, RegimeError> {
    if !f.same_grid(g) {
        return Err(RegimeError::GridMismatch);
    }
    let mut rho = T::zero();
    for (a, b) in f.values.iter().zip(&g.values) {
        let below = (a[0] - b[0]).abs();
        let above = (a[a.len() - 1] - b[b.len() - 1]).abs();
        let inner = a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()));
        rho = rho.max(inner).max(below).max(above);
    }
    Ok(rho)
}

/// Iteration controls for [`RegimeModel::solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Grid intervals over `[0, x_max]`.
    pub grid_points: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions { tol: lit(1e-8), max_iter: 2000, grid_points: 2000 }
    }
}

/// One `T_sup` step of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub rho: T,
    pub barriers: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSolution<T> {
    pub field: ValueField<T>,
    pub barriers: Vec<T>,
    pub iterations: usize,
    pub final_rho: T,
    /// Steps since the last grid extension.
    pub trace: Vec<IterationRecord<T>>,
    /// `ρ(T_sup V, V)` at the returned field.
    pub post_check_rho: T,
    pub regrids: usize,
}

impl<T: Real> RegimeSolution<T> {
    /// `ρ_{n+1}/ρ_n` along the trace.
    pub fn decay_ratios(&self) -> Vec<T> {
        self.trace.windows(2).map(|w| w[1].rho / w[0].rho).collect()
    }
}

/// Tolerance for the 𝓒 membership test on inputs of `T_sup`.
const C_TOL: f64 = 1e-8;
/// Largest concavity repair accepted from the hat operator.
const MAX_VIOLATION: f64 = 1e-6;

impl<T: Real> RegimeModel<T> {
    pub fn new(
        states: Vec<String>,
        switch_rates: Vec<Vec<T>>,
        discounts: Vec<T>,
        levy: Vec<LevySpec<T>>,
        switch_jumps: Vec<Vec<SwitchJump<T>>>,
        phi: T,
    ) -> Result<Self, RegimeError> {
        let m = RegimeModel { states, switch_rates, discounts, levy, switch_jumps, phi };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), RegimeError> {
        let n = self.states.len();
        if n == 0 {
            return Err(RegimeError::NoStates);
        }
        let dim = |what: &str| RegimeError::Dimension(format!("{what} must have {n} entries"));
        if self.switch_rates.len() != n || self.switch_rates.iter().any(|r| r.len() != n) {
            return Err(dim("switch_rates"));
        }
        if self.switch_jumps.len() != n || self.switch_jumps.iter().any(|r| r.len() != n) {
            return Err(dim("switch_jumps"));
        }
        if self.discounts.len() != n {
            return Err(dim("discounts"));
        }
        if self.levy.len() != n {
            return Err(dim("levy"));
        }
        if !(self.phi > T::one()) || !self.phi.is_finite() {
            return Err(RegimeError::PhiTooSmall);
        }
        for i in 0..n {
            self.levy[i].validate().map_err(|e| RegimeError::Levy(i, e))?;
            if !(self.discounts[i] > T::zero()) || !self.discounts[i].is_finite() {
                return Err(RegimeError::NonPositiveDiscount(i));
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = self.switch_rates[i][j];
                if !(r >= T::zero()) || !r.is_finite() {
                    return Err(RegimeError::BadSwitchRate(i, j));
                }
                self.switch_jumps[i][j].validate().map_err(|e| RegimeError::BadJump(i, j, e))?;
            }
            if !(self.total_rate(i) > T::zero()) {
                return Err(RegimeError::NoSwitching(i));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// `λ_i = Σ_{j≠i} λ_ij`.
    pub fn total_rate(&self, i: usize) -> T {
        (0..self.n_states()).filter(|&j| j != i).fold(T::zero(), |a, j| a + self.switch_rates[i][j])
    }

    /// `q_i = δ_i + λ_i`.
    pub fn q(&self, i: usize) -> T {
        self.discounts[i] + self.total_rate(i)
    }

    /// Contraction factor `max_i λ_i/(λ_i + δ_i)`.
    pub fn beta(&self) -> T {
        (0..self.n_states()).fold(T::zero(), |m, i| m.max(self.total_rate(i) / self.q(i)))
    }

    fn evaluators(&self) -> Result<Vec<ScaleEvaluator<T>>, RegimeError> {
        (0..self.n_states()).map(|i| Ok(ScaleEvaluator::new(&self.levy[i], self.q(i))?)).collect()
    }

    /// `f̂(x_k, i)` on the grid of `f`, without any concavity repair.
    pub fn hat_samples(&self, f: &ValueField<T>, i: usize) -> Result<Vec<T>, RegimeError> {
        if f.states() != self.n_states() {
            return Err(RegimeError::GridMismatch);
        }
        let n = f.intervals();
        let h = f.step();
        let lam = self.total_rate(i);
        let mut out = vec![T::zero(); n + 1];
        for j in (0..self.n_states()).filter(|&j| j != i) {
            let rate = self.switch_rates[i][j];
            if rate == T::zero() {
                continue;
            }
            let p = rate / lam;
            let fj = f.values(j);
            match &self.switch_jumps[i][j] {
                SwitchJump::None => {
                    for (o, &v) in out.iter_mut().zip(fj) {
                        *o = *o + p * v;
                    }
                }
                SwitchJump::HyperExp { weights, rates } => {
                    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
                    for (&w, &nu) in weights.iter().zip(rates) {
                        let pw = p * w / total;
                        for (o, g) in out.iter_mut().zip(exp_smoothing(fj, h, nu, self.phi)) {
                            *o = *o + pw * g;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `f̂(·, i)` as a concave payoff with unit tail slope. Requires `f ∈ 𝓒`.
    pub fn hat_operator(&self, f: &ValueField<T>, i: usize) -> Result<ConcavePayoff<T>, RegimeError> {
        f.check_in_c(lit(C_TOL))?;
        self.concave_hat(f, i)
    }

    fn concave_hat(&self, f: &ValueField<T>, i: usize) -> Result<ConcavePayoff<T>, RegimeError> {
        let ys = self.hat_samples(f, i)?;
        let samples: Vec<(T, T)> = f.grid().into_iter().zip(ys).collect();
        let c = concavify(&samples)?;
        if c.max_violation > lit(MAX_VIOLATION) {
            return Err(RegimeError::ConcavityViolation(f64_of(c.max_violation)));
        }
        let pw = c.payoff.as_piecewise();
        let unit = PiecewiseLinear::new(pw.xs().to_vec(), pw.ys().to_vec(), T::one())?;
        Ok(ConcavePayoff::from_piecewise(unit))
    }

    fn raw_hat(&self, f: &ValueField<T>, i: usize) -> Result<PiecewiseLinear<T>, RegimeError> {
        let ys = self.hat_samples(f, i)?;
        Ok(PiecewiseLinear::new(f.grid(), ys, T::one())?)
    }

    fn context(&self, ev: &ScaleEvaluator<T>, i: usize, payoff: PiecewiseLinear<T>) -> Result<AuxContext<T>, RegimeError> {
        Ok(AuxContext::with_evaluator(self.levy[i].clone(), ev.clone(), self.total_rate(i), self.phi, payoff)?)
    }

    /// Auxiliary problem of state `i` with payoff `f̂(·, i)`, `f ∈ 𝓒`.
    pub fn state_context(&self, f: &ValueField<T>, i: usize) -> Result<AuxContext<T>, RegimeError> {
        let payoff = self.hat_operator(f, i)?;
        let ev = ScaleEvaluator::new(&self.levy[i], self.q(i))?;
        self.context(&ev, i, payoff.as_piecewise().clone())
    }

    fn state_values(ctx: &AuxContext<T>, b: T, grid: &[T]) -> Result<Vec<T>, RegimeError> {
        let bv = ctx.at_barrier(b)?;
        Ok(bv.sweep(grid).into_iter().map(|(v, _)| v).collect())
    }

    /// `T_b f` for any `f ∈ 𝓑`.
    pub fn apply_t_b(&self, f: &ValueField<T>, b: &[T]) -> Result<ValueField<T>, RegimeError> {
        if b.len() != self.n_states() {
            return Err(RegimeError::Dimension(format!("barrier vector must have {} entries", self.n_states())));
        }
        let evs = self.evaluators()?;
        let grid = f.grid();
        let mut values = Vec::with_capacity(self.n_states());
        for (i, ev) in evs.iter().enumerate() {
            let ctx = self.context(ev, i, self.raw_hat(f, i)?)?;
            values.push(Self::state_values(&ctx, b[i], &grid)?);
        }
        ValueField::from_values(f.step(), self.phi, values)
    }

    /// `T_sup f` and the maximizing barriers `b^f`, for `f ∈ 𝓒`.
    pub fn apply_t_sup(&self, f: &ValueField<T>) -> Result<(ValueField<T>, Vec<T>), RegimeError> {
        self.t_sup_with(&self.evaluators()?, f, None)
    }

    fn t_sup_with(
        &self,
        evs: &[ScaleEvaluator<T>],
        f: &ValueField<T>,
        hints: Option<&[T]>,
    ) -> Result<(ValueField<T>, Vec<T>), RegimeError> {
        f.check_in_c(lit(C_TOL))?;
        let grid = f.grid();
        let mut values = Vec::with_capacity(self.n_states());
        let mut barriers = Vec::with_capacity(self.n_states());
        for (i, ev) in evs.iter().enumerate() {
            let payoff = self.concave_hat(f, i)?;
            let ctx = self.context(ev, i, payoff.as_piecewise().clone())?;
            let b = ctx.barrier_root(hints.map(|h| h[i]))?;
            values.push(Self::state_values(&ctx, b, &grid)?);
            barriers.push(b);
        }
        Ok((ValueField::from_values(f.step(), self.phi, values)?, barriers))
    }

    /// Fixed point of `T_sup` from the seed `f_0(x, i) = x`.
    pub fn solve(&self, opts: &SolverOptions<T>) -> Result<RegimeSolution<T>, RegimeError> {
        self.solve_from(|x, _| x, opts)
    }

    /// Fixed point of `T_sup` from an arbitrary seed in 𝓒.
    ///
    /// The grid starts at four times the largest `Z_{q_i}⁻¹(φ)` and is doubled
    /// whenever a barrier passes 80% of it.
    pub fn solve_from(&self, seed: impl Fn(T, usize) -> T, opts: &SolverOptions<T>) -> Result<RegimeSolution<T>, RegimeError> {
        self.validate()?;
        let evs = self.evaluators()?;
        let mut x_max = T::zero();
        for ev in &evs {
            x_max = x_max.max(ev.z_inverse(self.phi)?);
        }
        x_max = x_max * lit(4.0);
        let n = opts.grid_points.max(2);
        let mut field = ValueField::from_fn(x_max, n, self.phi, self.n_states(), &seed);
        let mut hints: Option<Vec<T>> = None;
        let mut trace: Vec<IterationRecord<T>> = Vec::new();
        let mut iterations = 0;
        let mut regrids = 0;
        loop {
            let (next, barriers) = self.t_sup_with(&evs, &field, hints.as_deref())?;
            iterations += 1;
            if barriers.iter().any(|&b| b > lit::<T>(0.8) * x_max) {
                x_max = x_max * lit(2.0);
                field = next.regrid(x_max, n);
                trace.clear();
                regrids += 1;
                hints = Some(barriers);
                continue;
            }
            let rho = rho_metric(&field, &next)?;
            trace.push(IterationRecord { rho, barriers: barriers.clone() });
            field = next;
            hints = Some(barriers);
            if rho < opts.tol {
                break;
            }
            if iterations >= opts.max_iter {
                let ratio = match trace.as_slice() {
                    [.., a, b] => f64_of(b.rho / a.rho),
                    _ => f64::NAN,
                };
                return Err(RegimeError::NoConvergence { rho: f64_of(rho), iterations, ratio });
            }
        }
        let (again, barriers) = self.t_sup_with(&evs, &field, hints.as_deref())?;
        let post_check_rho = rho_metric(&field, &again)?;
        let final_rho = trace.last().map_or(T::zero(), |r| r.rho);
        Ok(RegimeSolution { field, barriers, iterations, final_rho, trace, post_check_rho, regrids })
    }
}

/// `G(x_k) = E f(x_k − Y)`, `Y ~ Exp(ν)`, for `f` linear between grid points
/// and equal to `φx + f(0)` below 0.
fn exp_smoothing<T: Real>(f: &[T], h: T, nu: T, phi: T) -> Vec<T> {
    let decay = (-nu * h).exp();
    let one_minus = -(-nu * h).exp_m1();
    // ∫₀ʰ ν e^{−νt} t dt
    let moment = (one_minus - nu * h * decay) / nu;
    let mut g = Vec::with_capacity(f.len());
    let mut cur = f[0] - phi / nu;
    g.push(cur);
    for k in 0..f.len() - 1 {
        let slope = (f[k + 1] - f[k]) / h;
        cur = decay * cur + f[k + 1] * one_minus - slope * moment;
        g.push(cur);
    }
    g
}
