use divcap_core::{LevySpec, PiecewiseLinear};

use crate::rng::PathRng;

/// One state's Lévy dynamics in sampling-friendly form.
#[derive(Debug, Clone)]
pub(crate) struct Dynamics {
    pub mu: f64,
    pub sigma: f64,
    pub eta: f64,
    cum: Vec<f64>,
    rates: Vec<f64>,
}

/// Component choice by cumulative weight, then an exponential of that rate.
pub(crate) fn sample_hyperexp(cum: &[f64], rates: &[f64], rng: &mut PathRng) -> f64 {
    let u = rng.uniform() * cum[cum.len() - 1];
    let k = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
    rng.exp1() / rates[k]
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

impl Dynamics {
    pub fn new(spec: &LevySpec<f64>) -> Self {
        let weights: Vec<f64> = spec.jump_mix.iter().map(|c| c.weight).collect();
        Dynamics {
            mu: spec.drift_mu,
            sigma: spec.sigma,
            eta: if spec.has_jumps() { spec.jump_rate } else { 0.0 },
            cum: cumulative(&weights),
            rates: spec.jump_mix.iter().map(|c| c.rate).collect(),
        }
    }

    pub fn is_bv(&self) -> bool {
        self.sigma == 0.0
    }

    /// Downward drift rate `c = −μ` of a bounded-variation path.
    pub fn bv_rate(&self) -> f64 {
        -self.mu
    }

    /// Time to the next upward jump (∞ without jumps).
    pub fn next_jump(&self, rng: &mut PathRng) -> f64 {
        if self.eta > 0.0 {
            rng.exp1() / self.eta
        } else {
            f64::INFINITY
        }
    }

    pub fn jump(&self, rng: &mut PathRng) -> f64 {
        sample_hyperexp(&self.cum, &self.rates, rng)
    }

    /// Drift-plus-diffusion increment over `tau`.
    #[inline]
    pub fn increment(&self, tau: f64, rng: &mut PathRng) -> f64 {
        self.mu * tau + self.sigma * tau.sqrt() * rng.normal()
    }

    /// Variance of the Brownian part over `tau`.
    #[inline]
    pub fn var(&self, tau: f64) -> f64 {
        self.sigma * self.sigma * tau
    }

    /// One step of `[0, b]`-reflected diffusion. The barrier nearer to the
    /// start is handled exactly through the bridge extremum, the other by
    /// clipping the endpoint. Returns `(end, injection, dividend)`.
    pub fn reflect_step(&self, u: f64, b: f64, tau: f64, rng: &mut PathRng) -> (f64, f64, f64) {
        let a = self.increment(tau, rng);
        let var = self.var(tau);
        if u <= 0.5 * b {
            let dr = (-(u + bridge_min(a, var, rng.uniform()))).max(0.0);
            let end = u + a + dr;
            let dd = (end - b).max(0.0);
            (end - dd, dr, dd)
        } else {
            let dd = (u + bridge_max(a, var, rng.uniform()) - b).max(0.0);
            let end = u + a - dd;
            let dr = (-end).max(0.0);
            (end + dr, dr, dd)
        }
    }
}

/// Minimum over the step of a Brownian bridge from 0 to `a`, variance `var`.
#[inline]
pub(crate) fn bridge_min(a: f64, var: f64, u: f64) -> f64 {
    0.5 * (a - (a * a - 2.0 * var * u.ln()).sqrt())
}

/// Maximum over the step of a Brownian bridge from 0 to `a`, variance `var`.
#[inline]
pub(crate) fn bridge_max(a: f64, var: f64, u: f64) -> f64 {
    0.5 * (a + (a * a - 2.0 * var * u.ln()).sqrt())
}

/// Probability that a Brownian bridge between points at distances `d0`,
/// `d1 > 0` from a level touches it.
#[inline]
pub(crate) fn crossing_prob(d0: f64, d1: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    (-2.0 * d0 * d1 / var).exp()
}

/// `1 − e^{−x}(1 + x)` without cancellation.
fn one_minus_exp_poly(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * (0.5 - x * (1.0 / 3.0 - x * (0.125 - x / 30.0)))
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// `∫₀ᴸ e^{−qs} (w0 + (w1 − w0) s/L) ds`.
pub(crate) fn lin_disc_integral(q: f64, len: f64, w0: f64, w1: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let x = q * len;
    let j0 = -(-x).exp_m1() / q;
    let j1 = one_minus_exp_poly(x) / (q * q);
    w0 * j0 + (w1 - w0) * j1 / len
}

/// `∫₀ˢ e^{−qs} ω(y0 − c s) ds` for a path drifting down at rate `c` and
/// staying nonnegative.
pub(crate) fn drift_payoff_integral(q: f64, omega: &PiecewiseLinear<f64>, y0: f64, c: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let w = |y: f64| omega.eval(y.max(0.0)).unwrap_or(0.0);
    let y_end = (y0 - c * len).max(0.0);
    let mut total = 0.0;
    let (mut s_a, mut y_a) = (0.0, y0);
    let inner = omega.xs().iter().rev().filter(|&&k| k < y0 && k > y_end);
    for &y_b in inner.chain(std::iter::once(&y_end)) {
        let s_b = if y_b == y_end { len } else { (y0 - y_b) / c };
        total += (-q * s_a).exp() * lin_disc_integral(q, s_b - s_a, w(y_a), w(y_b));
        s_a = s_b;
        y_a = y_b;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use divcap_core::quadrature::integrate;

    #[test]
    fn linear_discount_integral_matches_quadrature() {
        for (q, len) in [(1.0, 0.5), (0.3, 1e-5), (2.0, 3.0)] {
            let exact = lin_disc_integral(q, len, 1.3, -0.4);
            let quad = integrate(|s: f64| (-q * s).exp() * (1.3 + (-1.7) * s / len), 0.0, len, 1e-13, 0.0);
            assert!((exact - quad).abs() < 1e-13 * (1.0 + quad.abs()));
        }
    }

    #[test]
    fn drift_integral_matches_quadrature() {
        let omega = PiecewiseLinear::new(vec![0.0, 0.5, 1.2], vec![0.1, 0.9, 1.3], 0.2).unwrap();
        let (q, y0, c, len) = (0.7, 2.0, 1.1, 1.6);
        let exact = drift_payoff_integral(q, &omega, y0, c, len);
        let quad = divcap_core::quadrature::integrate_split(
            |s: f64| (-q * s).exp() * omega.eval(y0 - c * s).unwrap(),
            &[0.0, (y0 - 1.2) / c, (y0 - 0.5) / c, len],
            1e-13,
            0.0,
        );
        assert!((exact - quad).abs() < 1e-12);
    }

    #[test]
    fn bridge_extremes_bracket_endpoints() {
        let mut rng = PathRng::new(3, 0, false);
        for _ in 0..1000 {
            let a = rng.normal();
            let u = rng.uniform();
            assert!(bridge_min(a, 1.0, u) <= a.min(0.0));
            assert!(bridge_max(a, 1.0, u) >= a.max(0.0));
        }
    }

    #[test]
    fn bridge_minimum_has_the_right_law() {
        // P(min ≤ −m) = exp(−2 m (m + a)/var) for a bridge ending at a
        let (a, var, m) = (0.3, 0.5, 0.4);
        let mut rng = PathRng::new(11, 0, false);
        let n = 200_000;
        let hits = (0..n).filter(|_| bridge_min(a, var, rng.uniform()) <= -m).count();
        let p = hits as f64 / n as f64;
        let exact = (-2.0 * m * (m + a) / var).exp();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p - exact).abs() < 4.0 * se);
    }
}
