//! Model configuration file.
//!
//! ```toml
//! [levy.calm]
//! drift_mu = 0.0
//! sigma = 1.4142135623730951
//! jump_rate = 1.0
//! jump_mix = [[0.6, 2.0], [0.4, 5.0]]   # (weight, rate) pairs
//!
//! [chain]
//! states = ["calm", "storm"]
//! switch_rates = [[0.0, 0.5], [0.8, 0.0]]
//! discounts = [0.1, 0.2]
//!
//! [jumps.calm.storm]
//! kind = "hyperexp"
//! weights = [1.0]
//! rates = [3.0]
//!
//! [problem]
//! phi = 2.0
//! lambda = 0.0
//! delta = 1.0
//! payoff_knots = [[0.0, 0.0]]
//! payoff_tail = 1.0
//!
//! [solver]
//! tol = 1e-8
//!
//! [sim]
//! paths = 10000
//! ```
//!
//! Every section is optional; each command asks for the ones it needs.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use divcap_core::{AuxProblem, ConcavePayoff, JumpComponent, LevySpec, RegimeModel, SolverOptions, SwitchJump};
use divcap_sim::SimConfig;
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    pub drift_mu: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_rate: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_mix: Option<Spanned<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub states: Option<Spanned<Vec<String>>>,
    pub switch_rates: Option<Spanned<Vec<Vec<f64>>>>,
    pub discounts: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    None,
    Hyperexp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSection {
    pub kind: Spanned<JumpKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub phi: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Spanned<f64>>,
    /// `(x, ω(x))` pairs, first at `x = 0`. Defaults to `ω(x) = x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_knots: Option<Spanned<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_tail: Option<Spanned<f64>>,
    /// Which `levy` entry the single-regime commands use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Spanned<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to the shortest horizon accepted for the smallest discount.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Parsed document, before any model is built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub levy: BTreeMap<String, Spanned<LevySection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Spanned<ChainSection>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub jumps: BTreeMap<String, BTreeMap<String, Spanned<JumpSection>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<Spanned<ProblemSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// A configuration together with the text it came from, for line numbers.
#[derive(Debug, Clone)]
pub struct Config {
    pub doc: ModelConfig,
    source: String,
}

fn to_line(source: &str, offset: usize) -> usize {
    source.as_bytes()[..offset.min(source.len())].iter().filter(|&&c| c == b'\n').count() + 1
}

impl Config {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let doc: ModelConfig = toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| to_line(source, s.start)),
            key: String::new(),
            message: e.message().trim().to_string(),
        })?;
        let cfg = Config { doc, source: source.to_string() };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.doc).expect("config serializes")
    }

    fn err(&self, span: Option<Range<usize>>, key: impl Into<String>, message: impl Into<String>) -> ConfigError {
        ConfigError { line: span.map(|s| to_line(&self.source, s.start)), key: key.into(), message: message.into() }
    }

    /// Checks everything that does not depend on the command.
    fn check(&self) -> Result<(), ConfigError> {
        for name in self.doc.levy.keys() {
            self.levy_spec(name)?;
        }
        if let Some(p) = &self.doc.problem {
            self.phi()?;
            if p.get_ref().payoff_knots.is_some() || p.get_ref().payoff_tail.is_some() {
                self.payoff()?;
            }
        }
        if self.doc.chain.is_some() {
            self.regime_model()?;
        }
        Ok(())
    }

    pub fn has_chain(&self) -> bool {
        self.doc.chain.is_some()
    }

    pub fn levy_spec(&self, name: &str) -> Result<LevySpec<f64>, ConfigError> {
        let key = format!("levy.{name}");
        let Some(sec) = self.doc.levy.get(name) else {
            return Err(self.err(None, key, "required"));
        };
        let s = sec.get_ref();
        let Some(drift) = &s.drift_mu else {
            return Err(self.err(Some(sec.span()), format!("{key}.drift_mu"), "required"));
        };
        let get = |v: &Option<Spanned<f64>>| v.as_ref().map_or(0.0, |x| *x.get_ref());
        let mix = s
            .jump_mix
            .as_ref()
            .map(|m| m.get_ref().iter().map(|&[weight, rate]| JumpComponent { weight, rate }).collect())
            .unwrap_or_default();
        LevySpec::new(*drift.get_ref(), get(&s.sigma), get(&s.jump_rate), mix)
            .map_err(|e| self.err(Some(sec.span()), key, e.to_string()))
    }

    fn problem(&self) -> Result<&Spanned<ProblemSection>, ConfigError> {
        self.doc.problem.as_ref().ok_or_else(|| self.err(None, "problem", "required"))
    }

    pub fn phi(&self) -> Result<f64, ConfigError> {
        let p = self.problem()?;
        let Some(phi) = &p.get_ref().phi else {
            return Err(self.err(Some(p.span()), "problem.phi", "required"));
        };
        let v = *phi.get_ref();
        if !(v > 1.0) || !v.is_finite() {
            return Err(self.err(Some(phi.span()), "problem.phi", "phi must exceed 1"));
        }
        Ok(v)
    }

    pub fn payoff(&self) -> Result<ConcavePayoff<f64>, ConfigError> {
        let p = self.problem()?.get_ref();
        let tail = p.payoff_tail.as_ref().map_or(1.0, |t| *t.get_ref());
        let span = p.payoff_knots.as_ref().map(|k| k.span()).or_else(|| p.payoff_tail.as_ref().map(|t| t.span()));
        let knots: Vec<(f64, f64)> = match &p.payoff_knots {
            Some(k) => k.get_ref().iter().map(|&[x, y]| (x, y)).collect(),
            None => vec![(0.0, 0.0)],
        };
        ConcavePayoff::new(&knots, tail).map_err(|e| self.err(span, "problem.payoff_knots", e.to_string()))
    }

    /// Name of the `levy` entry used by single-regime commands.
    pub fn aux_state(&self, requested: Option<&str>) -> Result<String, ConfigError> {
        if let Some(s) = requested {
            return self.doc.levy.contains_key(s).then(|| s.to_string()).ok_or_else(|| self.err(None, "--state", format!("no levy.{s}")));
        }
        if let Some(s) = self.doc.problem.as_ref().and_then(|p| p.get_ref().state.as_ref()) {
            let name = s.get_ref();
            return self
                .doc
                .levy
                .contains_key(name)
                .then(|| name.clone())
                .ok_or_else(|| self.err(Some(s.span()), "problem.state", format!("no levy.{name}")));
        }
        match self.doc.levy.len() {
            0 => Err(self.err(None, "levy", "required")),
            1 => Ok(self.doc.levy.keys().next().cloned().expect("one entry")),
            _ => Err(self.err(None, "problem.state", "required when several levy entries exist")),
        }
    }

    pub fn aux_problem(&self, state: Option<&str>) -> Result<(String, AuxProblem<f64>), ConfigError> {
        let name = self.aux_state(state)?;
        let spec = self.levy_spec(&name)?;
        let p = self.problem()?;
        let sec = p.get_ref();
        let phi = self.phi()?;
        let Some(delta) = &sec.delta else {
            return Err(self.err(Some(p.span()), "problem.delta", "required"));
        };
        let lambda = sec.lambda.as_ref().map_or(0.0, |l| *l.get_ref());
        let payoff = self.payoff()?;
        let prob = AuxProblem::new(spec, lambda, *delta.get_ref(), phi, payoff)
            .map_err(|e| self.err(Some(p.span()), "problem", e.to_string()))?;
        Ok((name, prob))
    }

    pub fn regime_model(&self) -> Result<RegimeModel<f64>, ConfigError> {
        let Some(chain) = &self.doc.chain else {
            return Err(self.err(None, "chain", "required"));
        };
        let c = chain.get_ref();
        let need = |key: &str| self.err(Some(chain.span()), format!("chain.{key}"), "required");
        let states = c.states.as_ref().ok_or_else(|| need("states"))?;
        let rates = c.switch_rates.as_ref().ok_or_else(|| need("switch_rates"))?;
        let discounts = c.discounts.as_ref().ok_or_else(|| need("discounts"))?;
        let names = states.get_ref();
        let n = names.len();
        if n == 0 {
            return Err(self.err(Some(states.span()), "chain.states", "at least one state required"));
        }
        for (k, s) in names.iter().enumerate() {
            if names[..k].contains(s) {
                return Err(self.err(Some(states.span()), "chain.states", format!("duplicate state {s}")));
            }
        }
        if rates.get_ref().len() != n || rates.get_ref().iter().any(|r| r.len() != n) {
            return Err(self.err(Some(rates.span()), "chain.switch_rates", format!("expected a {n}x{n} matrix")));
        }
        if discounts.get_ref().len() != n {
            return Err(self.err(Some(discounts.span()), "chain.discounts", format!("expected {n} entries")));
        }
        let levy = names.iter().map(|s| self.levy_spec(s)).collect::<Result<Vec<_>, _>>()?;
        for (from, row) in &self.doc.jumps {
            for to in row.keys() {
                if !names.contains(from) || !names.contains(to) {
                    return Err(self.err(Some(row[to].span()), format!("jumps.{from}.{to}"), "unknown state"));
                }
            }
        }
        let mut jumps = vec![vec![SwitchJump::None; n]; n];
        for (i, from) in names.iter().enumerate() {
            for (j, to) in names.iter().enumerate() {
                if let Some(sec) = self.doc.jumps.get(from).and_then(|r| r.get(to)) {
                    jumps[i][j] = self.switch_jump(from, to, sec)?;
                }
            }
        }
        let phi = self.phi()?;
        let model = RegimeModel {
            states: names.clone(),
            switch_rates: rates.get_ref().clone(),
            discounts: discounts.get_ref().clone(),
            levy,
            switch_jumps: jumps,
            phi,
        };
        model.validate().map_err(|e| self.err(Some(chain.span()), "chain", e.to_string()))?;
        Ok(model)
    }

    fn switch_jump(&self, from: &str, to: &str, sec: &Spanned<JumpSection>) -> Result<SwitchJump<f64>, ConfigError> {
        let key = format!("jumps.{from}.{to}");
        let s = sec.get_ref();
        match s.kind.get_ref() {
            JumpKind::None => {
                if s.weights.is_some() || s.rates.is_some() {
                    return Err(self.err(Some(sec.span()), key, "kind \"none\" takes no weights or rates"));
                }
                Ok(SwitchJump::None)
            }
            JumpKind::Hyperexp => {
                let (Some(weights), Some(rates)) = (&s.weights, &s.rates) else {
                    return Err(self.err(Some(sec.span()), key, "hyperexp needs weights and rates"));
                };
                Ok(SwitchJump::HyperExp { weights: weights.clone(), rates: rates.clone() })
            }
        }
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        let d = SolverOptions::default();
        let s = self.doc.solver.clone().unwrap_or_default();
        SolverOptions {
            tol: s.tol.unwrap_or(d.tol),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            grid_points: s.grid_points.unwrap_or(d.grid_points),
        }
    }

    /// Simulation settings; `q_min` picks the default horizon.
    pub fn sim_config(&self, q_min: f64) -> SimConfig {
        let d = SimConfig::default();
        let s = self.doc.sim.clone().unwrap_or_default();
        SimConfig {
            n_paths: s.paths.unwrap_or(d.n_paths),
            dt: s.dt.unwrap_or(d.dt),
            t_max: s.tmax.unwrap_or_else(|| SimConfig::min_horizon(q_min)),
            seed: s.seed.unwrap_or(d.seed),
            antithetic: s.antithetic.unwrap_or(d.antithetic),
            threads: s.threads.unwrap_or(d.threads),
        }
    }
}
