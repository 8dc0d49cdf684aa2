use divcap_core::LevySpec;

use crate::config::{SimConfig, SimError, SimEstimate};
use crate::dynamics::{bridge_max, crossing_prob, Dynamics};
use crate::rng::PathRng;

/// Streams of the reflected estimator are kept apart from the two-sided ones.
const REFLECTED_STREAMS: u64 = 1 << 63;

/// Discounted exit estimates from `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEstimates {
    /// `E_x[e^{−qτ₀⁻}; τ₀⁻ < τ_b⁺]`.
    pub down_first: SimEstimate,
    /// `E_x[e^{−qτ_b⁺}; τ_b⁺ < τ₀⁻]`.
    pub up_first: SimEstimate,
    /// `E_x[e^{−qσ}]`, `σ` the first passage below 0 of the path reflected at `b`.
    pub reflected_down: SimEstimate,
}

pub fn estimate_exit_identities(spec: &LevySpec<f64>, q: f64, b: f64, x: f64, cfg: &SimConfig) -> Result<ExitEstimates, SimError> {
    spec.validate().map_err(|e| SimError::Model(e.to_string()))?;
    if !(b > 0.0) {
        return Err(SimError::BadBarrier);
    }
    if !(0.0..=b).contains(&x) {
        return Err(SimError::OutsideBand(x));
    }
    cfg.validate(q)?;
    let d = Dynamics::new(spec);
    let bias = (-q * cfg.t_max).exp();
    let two_sided = cfg.run(0, |rng| two_sided_path(&d, q, b, x, cfg, rng));
    let reflected = cfg.run(REFLECTED_STREAMS, |rng| [reflected_path(&d, q, b, x, cfg, rng)]);
    Ok(ExitEstimates {
        down_first: SimEstimate::from_column(&two_sided, 0, bias),
        up_first: SimEstimate::from_column(&two_sided, 1, bias),
        reflected_down: SimEstimate::from_column(&reflected, 0, bias),
    })
}

fn two_sided_path(d: &Dynamics, q: f64, b: f64, x: f64, cfg: &SimConfig, rng: &mut PathRng) -> [f64; 2] {
    let down = |t: f64| [(-q * t).exp(), 0.0];
    let up = |t: f64| [0.0, (-q * t).exp()];
    let mut u = x;
    let mut t = 0.0;
    let mut next_jump = d.next_jump(rng);
    if d.is_bv() {
        let c = d.bv_rate();
        loop {
            let until_jump = next_jump - t;
            if u / c < until_jump {
                return if t + u / c < cfg.t_max { down(t + u / c) } else { [0.0, 0.0] };
            }
            if next_jump >= cfg.t_max {
                return [0.0, 0.0];
            }
            t = next_jump;
            u += d.jump(rng) - c * until_jump;
            if u > b {
                return up(t);
            }
            next_jump = t + d.next_jump(rng);
        }
    }
    // diffusive paths leave at once through the barrier they start on
    if x == 0.0 {
        return down(0.0);
    }
    if x == b {
        return up(0.0);
    }
    while t < cfg.t_max {
        let until_jump = next_jump - t;
        let tau = cfg.dt.min(until_jump).min(cfg.t_max - t);
        let var = d.var(tau);
        let end = u + d.increment(tau, rng);
        let (p_down, p_up) = (rng.uniform(), rng.uniform());
        let mid = t + 0.5 * tau;
        if end <= 0.0 || p_down < crossing_prob(u, end, var) {
            return down(mid);
        }
        if end >= b || p_up < crossing_prob(b - u, b - end, var) {
            return up(mid);
        }
        t += tau;
        u = end;
        if tau == until_jump {
            u += d.jump(rng);
            if u > b {
                return up(t);
            }
            next_jump = t + d.next_jump(rng);
        }
    }
    [0.0, 0.0]
}

fn reflected_path(d: &Dynamics, q: f64, b: f64, x: f64, cfg: &SimConfig, rng: &mut PathRng) -> f64 {
    let mut u = x;
    let mut t = 0.0;
    let mut next_jump = d.next_jump(rng);
    if d.is_bv() {
        let c = d.bv_rate();
        loop {
            let until_jump = next_jump - t;
            if u / c < until_jump {
                return if t + u / c < cfg.t_max { (-q * (t + u / c)).exp() } else { 0.0 };
            }
            if next_jump >= cfg.t_max {
                return 0.0;
            }
            t = next_jump;
            u = (u + d.jump(rng) - c * until_jump).min(b);
            next_jump = t + d.next_jump(rng);
        }
    }
    if x == 0.0 {
        return 1.0;
    }
    while t < cfg.t_max {
        let until_jump = next_jump - t;
        let tau = cfg.dt.min(until_jump).min(cfg.t_max - t);
        let var = d.var(tau);
        let a = d.increment(tau, rng);
        let v = rng.uniform();
        let end = if u <= 0.5 * b {
            let end = u + a;
            if end <= 0.0 || v < crossing_prob(u, end, var) {
                return (-q * (t + 0.5 * tau)).exp();
            }
            end.min(b)
        } else {
            let dd = (u + bridge_max(a, var, v) - b).max(0.0);
            let end = u + a - dd;
            if end <= 0.0 {
                return (-q * (t + 0.5 * tau)).exp();
            }
            end
        };
        t += tau;
        u = end;
        if tau == until_jump {
            u = (u + d.jump(rng)).min(b);
            next_jump = t + d.next_jump(rng);
        }
    }
    0.0
}
