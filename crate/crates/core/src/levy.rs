//! Spectrally positive Lévy processes with Brownian part and hyperexponential
//! upward jumps.
//!
//! The process is `X_t = drift_mu·t + sigma·B_t + S_t` where `S` is compound
//! Poisson with intensity `jump_rate` and jump density
//! `Σ_k w_k μ_k e^{−μ_k z}` on `z > 0`. Its Laplace exponent
//! `ψ(θ) = log E[e^{−θ X_1}]` is
//!
//! ```text
//! ψ(θ) = −drift_mu·θ + (σ²/2)·θ² + jump_rate·(Σ_k w_k μ_k/(μ_k + θ) − 1)
//! ```
//!
//! which is rational in `θ`, so the scale functions built on it are finite
//! exponential sums. With `sigma = 0` the paths have bounded variation and the
//! linear drift `c = −drift_mu` must be positive.

use thiserror::Error;

use crate::roots::safeguarded_newton;
use crate::scalar::{lit, Real};

/// One term `w·μ e^{−μ z}` of the hyperexponential jump density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpComponent<T> {
    pub weight: T,
    pub rate: T,
}

/// A spectrally positive Lévy process in natural parameterisation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevySpec<T> {
    /// Linear drift; `E[X_1] = drift_mu + jump_rate × mean jump`.
    pub drift_mu: T,
    pub sigma: T,
    /// Compound Poisson intensity of the upward jumps.
    pub jump_rate: T,
    pub jump_mix: Vec<JumpComponent<T>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevyError {
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("negative sigma")]
    NegativeSigma,
    #[error("negative jump_rate")]
    NegativeJumpRate,
    #[error("jump mixture empty while jump_rate > 0")]
    EmptyMixture,
    #[error("jump weight outside (0,1]")]
    BadWeight,
    #[error("weights sum ≠ 1 (sum = {0})")]
    WeightSum(f64),
    #[error("jump rates must be strictly positive")]
    NonPositiveRate,
    #[error("jump rates must be pairwise distinct")]
    DuplicateRates,
    #[error("monotone paths: subordinator")]
    Subordinator,
    #[error("monotone paths: pure drift")]
    PureDrift,
    #[error("theta must be nonnegative")]
    NegativeTheta,
    #[error("q must be positive")]
    NonPositiveQ,
}

impl<T: Real> LevySpec<T> {
    pub fn new(drift_mu: T, sigma: T, jump_rate: T, jump_mix: Vec<JumpComponent<T>>) -> Result<Self, LevyError> {
        let spec = LevySpec { drift_mu, sigma, jump_rate, jump_mix };
        spec.validate()?;
        Ok(spec)
    }

    /// Brownian motion with drift.
    pub fn brownian(drift_mu: T, sigma: T) -> Result<Self, LevyError> {
        Self::new(drift_mu, sigma, T::zero(), Vec::new())
    }

    /// Cramér–Lundberg type process: negative drift plus exponential jumps.
    pub fn cramer_lundberg(drift_mu: T, jump_rate: T, jump_mean: T) -> Result<Self, LevyError> {
        Self::new(
            drift_mu,
            T::zero(),
            jump_rate,
            vec![JumpComponent { weight: T::one(), rate: T::one() / jump_mean }],
        )
    }

    /// Checks every invariant and names the first one violated.
    pub fn validate(&self) -> Result<(), LevyError> {
        if !self.drift_mu.is_finite() {
            return Err(LevyError::NonFinite("drift_mu"));
        }
        if !self.sigma.is_finite() {
            return Err(LevyError::NonFinite("sigma"));
        }
        if !self.jump_rate.is_finite() {
            return Err(LevyError::NonFinite("jump_rate"));
        }
        if self.sigma < T::zero() {
            return Err(LevyError::NegativeSigma);
        }
        if self.jump_rate < T::zero() {
            return Err(LevyError::NegativeJumpRate);
        }
        if self.has_jumps() {
            if self.jump_mix.is_empty() {
                return Err(LevyError::EmptyMixture);
            }
            let mut sum = T::zero();
            for c in &self.jump_mix {
                if !c.weight.is_finite() || !c.rate.is_finite() {
                    return Err(LevyError::NonFinite("jump_mix"));
                }
                if c.weight <= T::zero() || c.weight > T::one() {
                    return Err(LevyError::BadWeight);
                }
                if c.rate <= T::zero() {
                    return Err(LevyError::NonPositiveRate);
                }
                sum = sum + c.weight;
            }
            if (sum - T::one()).abs() > lit::<T>(1e-12).max(T::epsilon() * lit(8.0)) {
                return Err(LevyError::WeightSum(sum.to_f64().unwrap_or(f64::NAN)));
            }
            for (i, a) in self.jump_mix.iter().enumerate() {
                if self.jump_mix[i + 1..].iter().any(|b| b.rate == a.rate) {
                    return Err(LevyError::DuplicateRates);
                }
            }
        }
        if self.sigma == T::zero() {
            if !self.has_jumps() {
                return Err(LevyError::PureDrift);
            }
            if self.drift_mu >= T::zero() {
                return Err(LevyError::Subordinator);
            }
        }
        Ok(())
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_rate > T::zero()
    }

    /// Paths of bounded variation (no Brownian part).
    pub fn is_bounded_variation(&self) -> bool {
        self.sigma == T::zero()
    }

    /// Drift `c = −drift_mu` of the bounded-variation representation `X_t = −ct + S_t`.
    pub fn bv_drift(&self) -> T {
        -self.drift_mu
    }

    // weights are only checked to sum to 1 within 1e-12; normalizing keeps ψ(0) = 0 exact
    fn weight_total(&self) -> T {
        self.jump_mix.iter().fold(T::zero(), |s, c| s + c.weight)
    }

    /// Mean jump size `Σ w_k/μ_k` (zero without jumps).
    pub fn mean_jump(&self) -> T {
        if !self.has_jumps() {
            return T::zero();
        }
        self.jump_mix.iter().fold(T::zero(), |s, c| s + c.weight / c.rate) / self.weight_total()
    }

    /// `E[X_1] = −ψ′(0+)`.
    pub fn mean(&self) -> T {
        self.drift_mu + self.jump_rate * self.mean_jump()
    }

    /// The rational formula for ψ evaluated at any `s` away from the poles
    /// `s = −μ_k`, including negative arguments.
    ///
    /// Written as `s·(−μ + σ²s/2 − η Σ w_k/(μ_k + s))` so that small `s`
    /// loses no digits to cancellation.
    pub fn psi_extended(&self, s: T) -> T {
        let half = lit::<T>(0.5);
        let mut v = -self.drift_mu + half * self.sigma * self.sigma * s;
        if self.has_jumps() {
            let m = self.jump_mix.iter().fold(T::zero(), |acc, c| acc + c.weight / (c.rate + s));
            v = v - self.jump_rate * m / self.weight_total();
        }
        s * v
    }

    /// Derivative of [`Self::psi_extended`].
    pub fn psi_prime_extended(&self, s: T) -> T {
        let mut v = -self.drift_mu + self.sigma * self.sigma * s;
        if self.has_jumps() {
            let m = self.jump_mix.iter().fold(T::zero(), |acc, c| {
                let d = c.rate + s;
                acc + c.weight * c.rate / (d * d)
            });
            v = v - self.jump_rate * m / self.weight_total();
        }
        v
    }

    pub fn laplace_exponent(&self, theta: T) -> Result<T, LevyError> {
        if theta < T::zero() {
            return Err(LevyError::NegativeTheta);
        }
        Ok(self.psi_extended(theta))
    }

    pub fn laplace_exponent_deriv(&self, theta: T) -> Result<T, LevyError> {
        if theta < T::zero() {
            return Err(LevyError::NegativeTheta);
        }
        Ok(self.psi_prime_extended(theta))
    }

    /// Right inverse `Φ(q) = sup{s ≥ 0 : ψ(s) = q}`.
    ///
    /// Brackets on `[0, upper]` with `upper` doubled until `ψ(upper) > q`, then
    /// runs a bisection-safeguarded Newton iteration.
    pub fn phi_inverse(&self, q: T) -> Result<T, LevyError> {
        if !(q > T::zero()) {
            return Err(LevyError::NonPositiveQ);
        }
        let mut upper = T::one();
        while self.psi_extended(upper) <= q {
            upper = upper * lit(2.0);
        }
        // ψ(0) − q = −q < 0. Past the minimum of the convex ψ there is exactly one root.
        // 1e-13 absolute, tightened to a relative stop for small roots
        let xtol = lit::<T>(1e-13).min(T::epsilon() * upper);
        let root = safeguarded_newton(
            |s| self.psi_extended(s) - q,
            |s| self.psi_prime_extended(s),
            T::zero(),
            upper,
            xtol,
            T::zero(),
            400,
        );
        Ok(root)
    }
}
