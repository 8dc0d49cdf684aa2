use divcap_core::{RegimeModel, SwitchJump};

use crate::config::{SimConfig, SimError, SimEstimate};
use crate::dynamics::{bridge_max, bridge_min, cumulative, sample_hyperexp, Dynamics};
use crate::rng::PathRng;

const BOUND_STREAMS: u64 = 1 << 62;

type Mixture = (Vec<f64>, Vec<f64>);

/// Sampling form of a regime-switching model.
struct Chain {
    dynamics: Vec<Dynamics>,
    delta: Vec<f64>,
    rate: Vec<f64>,
    // per state: cumulative switch rates over all states (diagonal contributes 0)
    targets: Vec<Vec<f64>>,
    // per ordered pair: cumulative weights and rates of −J
    jumps: Vec<Vec<Option<Mixture>>>,
}

impl Chain {
    fn new(model: &RegimeModel<f64>) -> Result<Self, SimError> {
        model.validate().map_err(|e| SimError::Model(e.to_string()))?;
        let n = model.n_states();
        let targets = (0..n)
            .map(|i| cumulative(&(0..n).map(|j| if i == j { 0.0 } else { model.switch_rates[i][j] }).collect::<Vec<_>>()))
            .collect();
        let jumps = model
            .switch_jumps
            .iter()
            .map(|row| {
                row.iter()
                    .map(|j| match j {
                        SwitchJump::None => None,
                        SwitchJump::HyperExp { weights, rates } => Some((cumulative(weights), rates.clone())),
                    })
                    .collect()
            })
            .collect();
        Ok(Chain {
            dynamics: model.levy.iter().map(Dynamics::new).collect(),
            delta: model.discounts.clone(),
            rate: (0..n).map(|i| model.total_rate(i)).collect(),
            targets,
            jumps,
        })
    }

    /// Destination state and the (nonpositive) surplus jump.
    fn switch(&self, i: usize, rng: &mut PathRng) -> (usize, f64) {
        let cum = &self.targets[i];
        let u = rng.uniform() * cum[cum.len() - 1];
        let j = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
        let jump = match &self.jumps[i][j] {
            None => 0.0,
            Some((w, r)) => -sample_hyperexp(w, r, rng),
        };
        (j, jump)
    }

    fn next_switch(&self, i: usize, rng: &mut PathRng) -> f64 {
        rng.exp1() / self.rate[i]
    }

    fn min_delta(&self) -> f64 {
        self.delta.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

enum Event {
    Jump,
    Switch,
    Horizon,
}

/// NPV `E[∫e^{−∫δ}dD − φ∫e^{−∫δ}dR]` of the strategy reflecting at 0 and at
/// the barrier of the current state, started at `(x0, i0)`.
pub fn simulate_regime_npv(
    model: &RegimeModel<f64>,
    barriers: &[f64],
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
) -> Result<SimEstimate, SimError> {
    let chain = Chain::new(model)?;
    if barriers.len() != model.n_states() || barriers.iter().any(|&b| !(b > 0.0)) {
        return Err(SimError::BadBarrier);
    }
    if !(x0 >= 0.0) {
        return Err(SimError::OutsideBand(x0));
    }
    if i0 >= model.n_states() {
        return Err(SimError::Model(format!("state index {i0} out of range")));
    }
    let dmin = chain.min_delta();
    cfg.validate(dmin)?;
    let phi = model.phi;
    let samples = cfg.run(0, |rng| {
        let (div, inj) = regime_path(&chain, barriers, x0, i0, cfg, rng);
        [div - phi * inj]
    });
    let activity = chain
        .dynamics
        .iter()
        .zip(&model.levy)
        .map(|(d, s)| d.mu.abs() + d.sigma + d.eta * s.mean_jump())
        .fold(0.0, f64::max);
    let bmax = barriers.iter().copied().fold(0.0, f64::max);
    let bias = (-dmin * cfg.t_max).exp() * (bmax + (1.0 + phi) * (activity + 1.0) / dmin);
    Ok(SimEstimate::from_column(&samples, 0, bias))
}

fn regime_path(chain: &Chain, barriers: &[f64], x0: f64, i0: usize, cfg: &SimConfig, rng: &mut PathRng) -> (f64, f64) {
    let mut i = i0;
    let mut dividends = (x0 - barriers[i]).max(0.0);
    let mut injections = 0.0;
    let mut u = x0.min(barriers[i]);
    let mut t = 0.0;
    let mut disc = 1.0;
    let mut next_switch = chain.next_switch(i, rng);
    let mut next_jump = chain.dynamics[i].next_jump(rng);
    while t < cfg.t_max {
        let d = &chain.dynamics[i];
        let (b, delta) = (barriers[i], chain.delta[i]);
        let (horizon, event) = if next_jump < next_switch && next_jump < cfg.t_max {
            (next_jump, Event::Jump)
        } else if next_switch < cfg.t_max {
            (next_switch, Event::Switch)
        } else {
            (cfg.t_max, Event::Horizon)
        };
        let tau = if d.is_bv() { horizon - t } else { cfg.dt.min(horizon - t) };
        let decay = (-delta * tau).exp();
        if d.is_bv() {
            let c = d.bv_rate();
            let hit = u / c;
            if hit >= tau {
                u -= c * tau;
            } else {
                injections += disc * c * ((-delta * hit).exp() - decay) / delta;
                u = 0.0;
            }
        } else {
            let (end, dr, dd) = d.reflect_step(u, b, tau, rng);
            let mid = disc * (-0.5 * delta * tau).exp();
            injections += mid * dr;
            dividends += mid * dd;
            u = end;
        }
        disc *= decay;
        let reached = tau == horizon - t;
        t = if reached { horizon } else { t + tau };
        if !reached {
            continue;
        }
        match event {
            Event::Jump => {
                u += d.jump(rng);
                if u > b {
                    dividends += disc * (u - b);
                    u = b;
                }
                next_jump = t + d.next_jump(rng);
            }
            Event::Switch => {
                let (j, jump) = chain.switch(i, rng);
                u += jump;
                if u < 0.0 {
                    injections += disc * -u;
                    u = 0.0;
                }
                i = j;
                if u > barriers[i] {
                    dividends += disc * (u - barriers[i]);
                    u = barriers[i];
                }
                next_switch = t + chain.next_switch(i, rng);
                next_jump = t + chain.dynamics[i].next_jump(rng);
            }
            Event::Horizon => {}
        }
        assert!((0.0..=barriers[i]).contains(&u), "reflected path left [0, b]");
    }
    (dividends, injections)
}

/// Ingredients of the bounds `x + φ·inf_term ≤ V(x, i0) ≤ x + sup_term`,
/// computed for the free process started at `(0, i0)` with the smallest
/// discount rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueBounds {
    /// `E[∫e^{−δ̲t} d(X̲_t ∧ 0)]` (nonpositive).
    pub inf_term: SimEstimate,
    /// `E[∫e^{−δ̲t} d(X̄_t ∨ 0)]`.
    pub sup_term: SimEstimate,
    /// Whether the supremum term has settled: cutting the paths at half the
    /// horizon moves it by at most three standard errors.
    pub sup_converged: bool,
    pub phi: f64,
}

impl ValueBounds {
    /// Lower bound at `x` with its standard error.
    pub fn lower(&self, x: f64) -> (f64, f64) {
        (x + self.phi * self.inf_term.mean, self.phi * self.inf_term.std_error)
    }

    /// Upper bound at `x` with its standard error, when it has converged.
    pub fn upper(&self, x: f64) -> Option<(f64, f64)> {
        self.sup_converged.then_some((x + self.sup_term.mean, self.sup_term.std_error))
    }
}

pub fn estimate_value_bounds(model: &RegimeModel<f64>, i0: usize, cfg: &SimConfig) -> Result<ValueBounds, SimError> {
    let chain = Chain::new(model)?;
    if i0 >= model.n_states() {
        return Err(SimError::Model(format!("state index {i0} out of range")));
    }
    let dmin = chain.min_delta();
    cfg.validate(dmin)?;
    let samples = cfg.run(BOUND_STREAMS, |rng| bounds_path(&chain, dmin, i0, cfg, rng));
    let inf_term = SimEstimate::from_column(&samples, 0, 0.0);
    let sup_term = SimEstimate::from_column(&samples, 1, 0.0);
    let half = SimEstimate::from_column(&samples, 2, 0.0);
    let sup_converged = sup_term.std_error.is_finite() && (sup_term.mean - half.mean).abs() <= 3.0 * sup_term.std_error;
    Ok(ValueBounds { inf_term, sup_term, sup_converged, phi: model.phi })
}

/// `[∫e^{−δt}d(X̲∧0), ∫e^{−δt}d(X̄∨0), same up to t_max/2]` along one path.
fn bounds_path(chain: &Chain, delta: f64, i0: usize, cfg: &SimConfig, rng: &mut PathRng) -> [f64; 3] {
    let mut i = i0;
    let (mut x, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
    let (mut inf_acc, mut sup_acc, mut sup_half) = (0.0, 0.0, 0.0);
    let mut t = 0.0;
    let mut next_switch = chain.next_switch(i, rng);
    let mut next_jump = chain.dynamics[i].next_jump(rng);
    let half_time = 0.5 * cfg.t_max;
    while t < cfg.t_max {
        let d = &chain.dynamics[i];
        let (horizon, event) = if next_jump < next_switch && next_jump < cfg.t_max {
            (next_jump, Event::Jump)
        } else if next_switch < cfg.t_max {
            (next_switch, Event::Switch)
        } else {
            (cfg.t_max, Event::Horizon)
        };
        let tau = if d.is_bv() { horizon - t } else { cfg.dt.min(horizon - t) };
        if d.is_bv() {
            let c = d.bv_rate();
            let end = x - c * tau;
            if end < lo {
                let start = ((x - lo) / c).max(0.0);
                inf_acc -= c * (-delta * t).exp() * ((-delta * start).exp() - (-delta * tau).exp()) / delta;
                lo = end;
            }
            x = end;
        } else {
            let a = d.increment(tau, rng);
            let var = d.var(tau);
            let (v1, v2) = (rng.uniform(), rng.uniform());
            let mid = (-delta * (t + 0.5 * tau)).exp();
            let low = x + bridge_min(a, var, v1);
            if low < lo {
                inf_acc += mid * (low - lo);
                lo = low;
            }
            let high = x + bridge_max(a, var, v2);
            if high > hi {
                sup_acc += mid * (high - hi);
                if t + 0.5 * tau < half_time {
                    sup_half += mid * (high - hi);
                }
                hi = high;
            }
            x += a;
        }
        let reached = tau == horizon - t;
        t = if reached { horizon } else { t + tau };
        if !reached {
            continue;
        }
        let disc = (-delta * t).exp();
        match event {
            Event::Jump => {
                x += d.jump(rng);
                if x > hi {
                    sup_acc += disc * (x - hi);
                    if t < half_time {
                        sup_half += disc * (x - hi);
                    }
                    hi = x;
                }
                next_jump = t + d.next_jump(rng);
            }
            Event::Switch => {
                let (j, jump) = chain.switch(i, rng);
                x += jump;
                if x < lo {
                    inf_acc += disc * (x - lo);
                    lo = x;
                }
                i = j;
                next_switch = t + chain.next_switch(i, rng);
                next_jump = t + chain.dynamics[i].next_jump(rng);
            }
            Event::Horizon => {}
        }
    }
    [inf_acc, sup_acc, sup_half]
}
