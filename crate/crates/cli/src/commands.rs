use divcap_core::{AuxProblem, AuxSolution, RegimeModel, RegimeSolution, ScaleEvaluator, ValueField};
use divcap_sim::{estimate_exit_identities, simulate_aux_npv, simulate_regime_npv, SimConfig, SimEstimate};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::report::{num, Check, Csv, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("solver: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

fn solver_err(e: impl std::fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

/// Command-line settings that override or complement the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
    pub seed: Option<u64>,
    pub antithetic: bool,
    pub threads: Option<usize>,
    pub state: Option<String>,
    pub x0: Option<f64>,
    pub barriers: Option<Vec<f64>>,
    /// Use the single-regime problem even when a chain is configured.
    pub aux: bool,
}

impl Overrides {
    fn sim_config(&self, cfg: &Config, q_min: f64) -> SimConfig {
        let mut s = cfg.sim_config(q_min);
        s.n_paths = self.paths.unwrap_or(s.n_paths);
        s.dt = self.dt.unwrap_or(s.dt);
        s.t_max = self.tmax.unwrap_or(s.t_max);
        s.seed = self.seed.unwrap_or(s.seed);
        s.antithetic |= self.antithetic;
        s.threads = self.threads.unwrap_or(s.threads);
        s
    }
}

/// What a command produced: text for standard output and named files for
/// the output directory.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    /// Failed verification checks.
    pub failures: usize,
}

fn aux_curve(sol: &AuxSolution<f64>, upto: f64, points: usize) -> Csv {
    let xs: Vec<f64> = (0..=points).map(|k| upto * k as f64 / points as f64).collect();
    let opt = sol.optimal();
    let b = sol.barrier();
    let mut csv = Csv::new(["x", "V", "V_prime", "hjb_residual"]);
    for (&x, (v, dv)) in xs.iter().zip(opt.sweep(&xs)) {
        // the generator is not evaluated at 0 or at the barrier itself
        let hjb = if x > 0.0 && x != b { opt.hjb_residual(x).unwrap_or(f64::NAN) } else { f64::NAN };
        csv.reals(&[x, v, dv, hjb]);
    }
    csv
}

pub fn solve_aux(cfg: &Config, ov: &Overrides) -> Result<Output, CliError> {
    let (state, prob) = cfg.aux_problem(ov.state.as_deref())?;
    let sol = prob.solve().map_err(solver_err)?;
    let b = sol.barrier();
    let mut r = Report::new();
    r.text("state", state)
        .real("q", prob.q())
        .real("barrier", b)
        .real("v0", sol.value(0.0))
        .real("vb", sol.value(b))
        .real("smooth_fit_0", sol.value_derivative(0.0).map_err(solver_err)? - prob.phi)
        .real("smooth_fit_b", sol.value_derivative(b).map_err(solver_err)? - 1.0);
    Ok(Output { stdout: r.to_string(), files: vec![("aux_curve.csv".into(), aux_curve(&sol, 2.0 * b, 200).to_string())], failures: 0 })
}

fn solve_model(cfg: &Config) -> Result<(RegimeModel<f64>, RegimeSolution<f64>), CliError> {
    let model = cfg.regime_model()?;
    let sol = model.solve(&cfg.solver_options()).map_err(solver_err)?;
    Ok((model, sol))
}

fn regime_curves(model: &RegimeModel<f64>, field: &ValueField<f64>) -> Vec<(String, String)> {
    let grid = field.grid();
    (0..model.n_states())
        .map(|i| {
            let mut csv = Csv::new(["x", "V"]);
            for (x, v) in grid.iter().zip(field.values(i)) {
                csv.reals(&[*x, *v]);
            }
            (format!("curve_{}.csv", model.states[i]), csv.to_string())
        })
        .collect()
}

pub fn solve_regime(cfg: &Config, _ov: &Overrides) -> Result<Output, CliError> {
    let (model, sol) = solve_model(cfg)?;
    let mut r = Report::new();
    r.text("states", model.states.join(","));
    for (s, b) in model.states.iter().zip(&sol.barriers) {
        r.real(format!("barrier.{s}"), *b);
    }
    let max_ratio = sol.decay_ratios().into_iter().fold(0.0, f64::max);
    r.real("iterations", sol.iterations as f64)
        .real("final_rho", sol.final_rho)
        .real("post_check_rho", sol.post_check_rho)
        .real("beta", model.beta())
        .real("max_decay_ratio", max_ratio)
        .real("regrids", sol.regrids as f64)
        .real("x_max", sol.field.x_max());
    let mut trace = Csv::new(["n".to_string(), "rho".to_string()].into_iter().chain(model.states.iter().map(|s| format!("b_{s}"))));
    for (n, rec) in sol.trace.iter().enumerate() {
        let mut row = vec![(n + 1).to_string(), num(rec.rho)];
        row.extend(rec.barriers.iter().map(|&b| num(b)));
        r.text(format!("trace.{}", n + 1), row[1..].join(" "));
        trace.row(row);
    }
    let mut files = vec![("regime_trace.csv".to_string(), trace.to_string())];
    files.extend(regime_curves(&model, &sol.field));
    Ok(Output { stdout: r.to_string(), files, failures: 0 })
}

fn state_index(model: &RegimeModel<f64>, name: Option<&str>) -> Result<usize, CliError> {
    match name {
        None => Ok(0),
        Some(s) => model
            .states
            .iter()
            .position(|t| t == s)
            .or_else(|| s.parse::<usize>().ok().filter(|&i| i < model.n_states()))
            .ok_or_else(|| CliError::Usage(format!("--state: unknown state {s}"))),
    }
}

/// Value of the barrier strategy `b`: fixed point of `T_b` started from `start`.
fn barrier_value(model: &RegimeModel<f64>, start: &ValueField<f64>, b: &[f64], tol: f64, max_iter: usize) -> Option<ValueField<f64>> {
    let mut f = start.clone();
    for _ in 0..max_iter {
        let next = model.apply_t_b(&f, b).ok()?;
        let rho = divcap_core::rho_metric(&f, &next).ok()?;
        f = next;
        if rho < tol {
            return Some(f);
        }
    }
    None
}

pub fn simulate(cfg: &Config, ov: &Overrides) -> Result<Output, CliError> {
    let x0 = ov.x0.unwrap_or(0.0);
    let mut csv = Csv::new(["mode", "state", "x0", "barriers", "mean", "std_error", "analytic"]);
    if cfg.has_chain() && !ov.aux {
        let (model, sol) = solve_model(cfg)?;
        let i = state_index(&model, ov.state.as_deref())?;
        let barriers = match &ov.barriers {
            Some(b) if b.len() == model.n_states() => b.clone(),
            Some(b) => return Err(CliError::Usage(format!("expected {} barriers, got {}", model.n_states(), b.len()))),
            None => sol.barriers.clone(),
        };
        let dmin = model.discounts.iter().copied().fold(f64::INFINITY, f64::min);
        let sim = ov.sim_config(cfg, dmin);
        let est = simulate_regime_npv(&model, &barriers, x0, i, &sim).map_err(solver_err)?;
        let opts = cfg.solver_options();
        let analytic = barrier_value(&model, &sol.field, &barriers, opts.tol, opts.max_iter)
            .filter(|f| x0 <= f.x_max())
            .map_or(f64::NAN, |f| f.eval(x0, i));
        csv.row(sim_row("regime", &model.states[i], x0, &barriers, &est, analytic));
    } else {
        let (state, prob) = cfg.aux_problem(ov.state.as_deref())?;
        let ctx = prob.context().map_err(solver_err)?;
        let b = match &ov.barriers {
            Some(b) if b.len() == 1 => b[0],
            Some(b) => return Err(CliError::Usage(format!("expected 1 barrier, got {}", b.len()))),
            None => ctx.barrier_root(None).map_err(solver_err)?,
        };
        let analytic = ctx.at_barrier(b).map_err(solver_err)?.value(x0);
        let sim = ov.sim_config(cfg, prob.q());
        let est = simulate_aux_npv(&prob.spec, prob.payoff.as_piecewise(), prob.lambda, prob.delta, prob.phi, b, x0, &sim)
            .map_err(solver_err)?;
        csv.row(sim_row("aux", &state, x0, &[b], &est, analytic));
    }
    let text = csv.to_string();
    Ok(Output { stdout: text.clone(), files: vec![("simulate.csv".into(), text)], failures: 0 })
}

fn sim_row(mode: &str, state: &str, x0: f64, barriers: &[f64], est: &SimEstimate, analytic: f64) -> Vec<String> {
    vec![
        mode.into(),
        state.into(),
        num(x0),
        barriers.iter().map(|&b| num(b)).collect::<Vec<_>>().join(";"),
        num(est.mean),
        num(est.std_error),
        num(analytic),
    ]
}

pub fn curve(cfg: &Config, ov: &Overrides) -> Result<Output, CliError> {
    let text = if cfg.has_chain() && !ov.aux {
        let (model, sol) = solve_model(cfg)?;
        let grid = sol.field.grid();
        let mut csv = Csv::new(std::iter::once("x".to_string()).chain(model.states.iter().map(|s| format!("V_{s}"))));
        for (k, &x) in grid.iter().enumerate() {
            let mut row = vec![x];
            row.extend((0..model.n_states()).map(|i| sol.field.values(i)[k]));
            csv.reals(&row);
        }
        csv.to_string()
    } else {
        let (_, prob) = cfg.aux_problem(ov.state.as_deref())?;
        let sol = prob.solve().map_err(solver_err)?;
        aux_curve(&sol, 2.0 * sol.barrier(), 200).to_string()
    };
    Ok(Output { stdout: text.clone(), files: vec![("curve.csv".into(), text)], failures: 0 })
}

/// Runs every check the configuration supports.
pub fn verify(cfg: &Config, ov: &Overrides) -> Result<Output, CliError> {
    let mut checks: Vec<Check> = Vec::new();
    let mut identities = Csv::new(["model", "identity", "x", "analytic", "mc_mean", "mc_se"]);
    let problem = cfg.doc.problem.is_some();
    let states: Vec<String> = match &ov.state {
        Some(s) => vec![s.clone()],
        None => cfg.doc.levy.keys().cloned().collect(),
    };
    for name in &states {
        let spec = cfg.levy_spec(name)?;
        let aux = if problem { Some(cfg.aux_problem(Some(name))?.1) } else { None };
        let q = aux.as_ref().map_or(1.0, |p| p.q());
        let ev = ScaleEvaluator::new(&spec, q).map_err(solver_err)?;
        laplace_checks(name, &spec, &ev, &mut checks)?;
        exit_checks(name, &spec, &ev, &ov.sim_config(cfg, q), &mut checks, &mut identities)?;
        if let Some(prob) = aux {
            aux_checks(name, &prob, &ov.sim_config(cfg, q), &mut checks, &mut identities)?;
        }
    }
    if cfg.has_chain() {
        regime_checks(cfg, ov, &mut checks)?;
    }
    let failures = checks.iter().filter(|c| !c.passed).count();
    let mut out = String::new();
    for c in &checks {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out.push_str(&format!("checks={} failures={failures}\n", checks.len()));
    Ok(Output { stdout: out, files: vec![("verify_identities.csv".into(), identities.to_string())], failures })
}

fn check(checks: &mut Vec<Check>, name: &str, model: &str, passed: bool, observed: String, expected: String) {
    checks.push(Check { name: name.into(), model: model.into(), passed, observed, expected });
}

fn laplace_checks(model: &str, spec: &divcap_core::LevySpec<f64>, ev: &ScaleEvaluator<f64>, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let mut worst: f64 = 0.0;
    for gap in [0.2, 0.5, 1.0, 2.0, 5.0] {
        let s = ev.phi_q() + gap;
        let r = ev.verify_laplace_transform(spec, s, 40.0 / gap).map_err(solver_err)?;
        worst = worst.max(r);
    }
    check(checks, "laplace_transform", model, worst < 1e-6, format!("{worst:e}"), "<1e-6".into());
    Ok(())
}

fn exit_checks(
    model: &str,
    spec: &divcap_core::LevySpec<f64>,
    ev: &ScaleEvaluator<f64>,
    sim: &SimConfig,
    checks: &mut Vec<Check>,
    rows: &mut Csv,
) -> Result<(), CliError> {
    let b = 2.0;
    for x in [0.25 * b, 0.5 * b, 0.75 * b] {
        let est = estimate_exit_identities(spec, ev.q(), b, x, sim).map_err(solver_err)?;
        let y = b - x;
        let exact = [
            ("down_first", ev.w(y) / ev.w(b), est.down_first),
            ("up_first", ev.z(y) - ev.z(b) * ev.w(y) / ev.w(b), est.up_first),
            ("reflected_down", ev.z(y) / ev.z(b), est.reflected_down),
        ];
        for (id, value, e) in exact {
            rows.row(vec![model.into(), id.into(), num(x), num(value), num(e.mean), num(e.std_error)]);
            check(
                checks,
                &format!("exit_{id}@{x}"),
                model,
                e.agrees_with(value, 3.0),
                format!("{}±{:e}", e.mean, e.std_error),
                format!("{value} within 3 SE"),
            );
        }
    }
    Ok(())
}

fn aux_checks(model: &str, prob: &AuxProblem<f64>, sim: &SimConfig, checks: &mut Vec<Check>, rows: &mut Csv) -> Result<(), CliError> {
    let sol = prob.solve().map_err(solver_err)?;
    let b = sol.barrier();
    let fit_b = (sol.value_derivative(b).map_err(solver_err)? - 1.0).abs();
    let fit_0 = (sol.value_derivative(0.0).map_err(solver_err)? - prob.phi).abs();
    check(checks, "smooth_fit", model, fit_b <= 1e-8 && fit_0 <= 1e-8, format!("{fit_0:e},{fit_b:e}"), "<=1e-8".into());

    let mut worst_in: f64 = 0.0;
    let mut worst_above = f64::NEG_INFINITY;
    for k in 0..50 {
        let x = (k as f64 + 0.5) * b / 50.0;
        let r = sol.hjb_residual(x).map_err(solver_err)?;
        worst_in = worst_in.max(r.abs() / (1.0 + sol.value(x).abs()));
        let y = b * (1.0 + (k + 1) as f64 / 25.0);
        worst_above = worst_above.max(sol.hjb_residual(y).map_err(solver_err)?);
    }
    check(checks, "hjb_below_barrier", model, worst_in <= 1e-6, format!("{worst_in:e}"), "<=1e-6 (relative)".into());
    check(checks, "hjb_above_barrier", model, worst_above <= 1e-8, format!("{worst_above:e}"), "<=1e-8".into());

    let grid: Vec<f64> = (0..200).map(|k| 4.0 * b * k as f64 / 199.0).collect();
    let mut dominance_ok = true;
    let mut worst_gap = f64::INFINITY;
    for factor in [0.25, 0.5, 2.0, 4.0] {
        let gaps = sol.dominance_gap(factor * b, &grid).map_err(solver_err)?;
        worst_gap = gaps.iter().copied().fold(worst_gap, f64::min);
        dominance_ok &= gaps.iter().all(|&g| g >= -1e-9) && gaps.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    }
    check(checks, "dominance", model, dominance_ok, format!("min gap {worst_gap:e}"), ">=-1e-9, nondecreasing".into());

    for x in [0.0, 0.5 * b, b] {
        let est = simulate_aux_npv(&prob.spec, prob.payoff.as_piecewise(), prob.lambda, prob.delta, prob.phi, b, x, sim)
            .map_err(solver_err)?;
        let v = sol.value(x);
        rows.row(vec![model.into(), "aux_npv".into(), num(x), num(v), num(est.mean), num(est.std_error)]);
        check(
            checks,
            &format!("aux_npv@{x}"),
            model,
            est.agrees_with(v, 3.0),
            format!("{}±{:e}", est.mean, est.std_error),
            format!("{v} within 3 SE"),
        );
    }
    Ok(())
}

fn regime_checks(cfg: &Config, ov: &Overrides, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let (model, sol) = solve_model(cfg)?;
    let beta = model.beta();
    let ratio = sol.decay_ratios().into_iter().fold(0.0, f64::max);
    check(checks, "contraction", "chain", ratio <= beta + 1e-3, format!("{ratio}"), format!("<={}", beta + 1e-3));
    let tol = cfg.solver_options().tol;
    check(checks, "post_check", "chain", sol.post_check_rho <= 2.0 * tol, format!("{:e}", sol.post_check_rho), format!("<={:e}", 2.0 * tol));
    let dmin = model.discounts.iter().copied().fold(f64::INFINITY, f64::min);
    let sim = ov.sim_config(cfg, dmin);
    for (i, name) in model.states.iter().enumerate() {
        let x = 0.5 * sol.barriers[i];
        let est = simulate_regime_npv(&model, &sol.barriers, x, i, &sim).map_err(solver_err)?;
        let v = sol.field.eval(x, i);
        check(
            checks,
            &format!("regime_npv@{x}"),
            name,
            est.agrees_with(v, 3.0),
            format!("{}±{:e}", est.mean, est.std_error),
            format!("{v} within 3 SE"),
        );
    }
    Ok(())
}
