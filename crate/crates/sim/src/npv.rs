use divcap_core::{LevySpec, PiecewiseLinear};

use crate::config::{SimConfig, SimError, SimEstimate};
use crate::dynamics::{drift_payoff_integral, lin_disc_integral, Dynamics};
use crate::rng::PathRng;

/// Discounted dividends, injections and payoff flow of one path.
struct Flows {
    dividends: f64,
    injections: f64,
    payoff: f64,
}

/// NPV of the strategy reflecting at 0 and `b`, with killing at rate λ
/// integrated out: `E_x[∫e^{−qt}(dD − φ dR + λ ω(U_t) dt)]`, `q = δ + λ`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_aux_npv(
    spec: &LevySpec<f64>,
    payoff: &PiecewiseLinear<f64>,
    lambda: f64,
    delta: f64,
    phi: f64,
    b: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate, SimError> {
    spec.validate().map_err(|e| SimError::Model(e.to_string()))?;
    if !(b > 0.0) {
        return Err(SimError::BadBarrier);
    }
    if !(x0 >= 0.0) {
        return Err(SimError::OutsideBand(x0));
    }
    if !(lambda >= 0.0) || !(delta > 0.0) {
        return Err(SimError::BadDiscount);
    }
    let q = delta + lambda;
    cfg.validate(q)?;
    let dynamics = Dynamics::new(spec);
    let samples = cfg.run(0, |rng| {
        let f = aux_path(&dynamics, payoff, lambda > 0.0, q, b, x0, cfg, rng);
        [f.dividends - phi * f.injections + lambda * f.payoff]
    });
    Ok(SimEstimate::from_column(&samples, 0, truncation_bias(spec, payoff, lambda, q, phi, b, cfg.t_max)))
}

/// Bound on the discounted value of everything after `t_max`.
fn truncation_bias(spec: &LevySpec<f64>, payoff: &PiecewiseLinear<f64>, lambda: f64, q: f64, phi: f64, b: f64, t_max: f64) -> f64 {
    let activity = spec.drift_mu.abs() + spec.sigma + spec.jump_rate * spec.mean_jump();
    let omega = payoff.eval(b).unwrap_or(0.0).abs() + payoff.value_at_zero().abs();
    (-q * t_max).exp() * (b + (1.0 + phi) * (activity + 1.0) / q + lambda * omega / q)
}

#[allow(clippy::too_many_arguments)]
fn aux_path(
    d: &Dynamics,
    omega: &PiecewiseLinear<f64>,
    with_payoff: bool,
    q: f64,
    b: f64,
    x0: f64,
    cfg: &SimConfig,
    rng: &mut PathRng,
) -> Flows {
    let mut f = Flows { dividends: (x0 - b).max(0.0), injections: 0.0, payoff: 0.0 };
    let mut u = x0.min(b);
    let mut t = 0.0;
    let mut disc = 1.0;
    let mut next_jump = d.next_jump(rng);
    let w = |y: f64| omega.eval(y.max(0.0)).unwrap_or(0.0);
    let full_decay = (-q * cfg.dt).exp();
    let half_decay = (-0.5 * q * cfg.dt).exp();
    while t < cfg.t_max {
        let until_jump = next_jump - t;
        let jumps_now = until_jump <= cfg.t_max - t && (d.is_bv() || until_jump <= cfg.dt);
        let tau = if d.is_bv() { until_jump.min(cfg.t_max - t) } else { cfg.dt.min(until_jump).min(cfg.t_max - t) };
        let (decay, half) = if tau == cfg.dt { (full_decay, half_decay) } else { ((-q * tau).exp(), (-0.5 * q * tau).exp()) };
        if d.is_bv() {
            let c = d.bv_rate();
            let hit = u / c;
            if hit >= tau {
                if with_payoff {
                    f.payoff += disc * drift_payoff_integral(q, omega, u, c, tau);
                }
                u -= c * tau;
            } else {
                if with_payoff {
                    f.payoff += disc * drift_payoff_integral(q, omega, u, c, hit);
                    f.payoff += disc * w(0.0) * ((-q * hit).exp() - decay) / q;
                }
                f.injections += disc * c * ((-q * hit).exp() - decay) / q;
                u = 0.0;
            }
        } else {
            let (end, dr, dd) = d.reflect_step(u, b, tau, rng);
            debug_assert!((0.0..=b).contains(&end) && dr >= 0.0 && dd >= 0.0);
            let mid = disc * half;
            f.injections += mid * dr;
            f.dividends += mid * dd;
            if with_payoff {
                f.payoff += disc * lin_disc_integral(q, tau, w(u), w(end));
            }
            u = end;
        }
        t += tau;
        disc *= decay;
        if jumps_now {
            u += d.jump(rng);
            if u > b {
                f.dividends += disc * (u - b);
                u = b;
            }
            next_jump = t + d.next_jump(rng);
        }
        assert!((0.0..=b).contains(&u), "reflected path left [0, b]");
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use divcap_core::{AuxProblem, ConcavePayoff};

    #[test]
    fn rejects_bad_inputs() {
        let spec = LevySpec::brownian(0.0, 1.0).unwrap();
        let id = ConcavePayoff::identity();
        let cfg = SimConfig { n_paths: 10, t_max: 30.0, ..Default::default() };
        let pw = id.as_piecewise();
        assert_eq!(simulate_aux_npv(&spec, pw, 0.0, 1.0, 2.0, 0.0, 0.5, &cfg), Err(SimError::BadBarrier));
        assert!(matches!(
            simulate_aux_npv(&spec, pw, 0.0, 1.0, 2.0, 1.0, 0.5, &SimConfig { t_max: 5.0, ..cfg }),
            Err(SimError::ShortHorizon(_))
        ));
    }

    #[test]
    fn bounded_variation_matches_closed_form() {
        let spec = LevySpec::cramer_lundberg(-1.0, 1.0, 1.0).unwrap();
        let payoff = ConcavePayoff::new(&[(0.0, 0.0), (1.0, 1.0)], 0.5).unwrap();
        let prob = AuxProblem::new(spec.clone(), 0.5, 0.5, 1.5, payoff.clone()).unwrap();
        let sol = prob.solve().unwrap();
        let b = sol.barrier();
        let cfg = SimConfig { n_paths: 40_000, t_max: SimConfig::min_horizon(1.0), seed: 5, ..Default::default() };
        for x in [0.0, 0.5 * b, b] {
            let est = simulate_aux_npv(&spec, payoff.as_piecewise(), 0.5, 0.5, 1.5, b, x, &cfg).unwrap();
            assert!(est.agrees_with(sol.value(x), 3.0), "{x}: {est:?} vs {}", sol.value(x));
        }
    }

    #[test]
    fn reproducible() {
        let spec = LevySpec::new(-0.2, 0.7, 1.0, vec![divcap_core::JumpComponent { weight: 1.0, rate: 2.0 }]).unwrap();
        let pw = ConcavePayoff::identity();
        let cfg = SimConfig { n_paths: 200, t_max: 25.0, seed: 9, ..Default::default() };
        let a = simulate_aux_npv(&spec, pw.as_piecewise(), 0.3, 0.7, 1.5, 1.0, 0.4, &cfg).unwrap();
        let b = simulate_aux_npv(&spec, pw.as_piecewise(), 0.3, 0.7, 1.5, 1.0, 0.4, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_aux_npv(&spec, pw.as_piecewise(), 0.3, 0.7, 1.5, 1.0, 0.4, &SimConfig { threads: 3, ..cfg }).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn payoff_is_ignored_without_killing() {
        let spec = LevySpec::brownian(-0.1, 1.0).unwrap();
        let cfg = SimConfig { n_paths: 300, t_max: 25.0, ..Default::default() };
        let a = ConcavePayoff::identity();
        let b = ConcavePayoff::new(&[(0.0, 4.0), (1.0, 4.5)], 0.0).unwrap();
        let ea = simulate_aux_npv(&spec, a.as_piecewise(), 0.0, 1.0, 1.5, 1.0, 0.5, &cfg).unwrap();
        let eb = simulate_aux_npv(&spec, b.as_piecewise(), 0.0, 1.0, 1.5, 1.0, 0.5, &cfg).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn larger_injection_cost_lowers_npv() {
        let spec = LevySpec::brownian(-1.0, 0.5).unwrap();
        let cfg = SimConfig { n_paths: 2000, t_max: 25.0, ..Default::default() };
        let pw = ConcavePayoff::identity();
        let cheap = simulate_aux_npv(&spec, pw.as_piecewise(), 0.0, 1.0, 2.0, 1.0, 0.0, &cfg).unwrap();
        let dear = simulate_aux_npv(&spec, pw.as_piecewise(), 0.0, 1.0, 20.0, 1.0, 0.0, &cfg).unwrap();
        assert!(dear.mean < cheap.mean);
    }
}
