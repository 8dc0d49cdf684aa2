use std::path::Path;
use std::process::{Command, Output};

use divcap_cli::report::parse_barriers;

const SINH: &str = "[levy.sinh]\ndrift_mu = 0.0\nsigma = 1.4142135623730951\n\n[problem]\nphi = 2.0\nlambda = 0.0\ndelta = 1.0\n";

fn twin(rates: (f64, f64), discounts: (f64, f64)) -> String {
    format!(
        r#"
[levy.a]
drift_mu = -1.0
jump_rate = 1.0
jump_mix = [[1.0, 1.0]]

[levy.b]
drift_mu = -1.0
jump_rate = 1.0
jump_mix = [[1.0, 1.0]]

[chain]
states = ["a", "b"]
switch_rates = [[0.0, {}], [{}, 0.0]]
discounts = [{}, {}]

[problem]
phi = 1.5
delta = {}
state = "a"
"#,
        rates.0, rates.1, discounts.0, discounts.1, discounts.0
    )
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("model.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_divcap")).args(args).arg("--config").arg(&path).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap_or_else(|| panic!("{key} missing")).parse().unwrap()
}

#[test]
fn solve_aux_reports_the_arccosh_barrier() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), SINH, &["solve-aux", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let b = value(&stdout(&o), "barrier");
    assert!((b - 2f64.acosh()).abs() < 1e-10);
    let csv = std::fs::read_to_string(out.join("aux_curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,V,V_prime,hjb_residual"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &SINH.replace("phi = 2.0\n", ""), &["solve-aux"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("problem.phi: required"));
    let o = run(dir.path(), &SINH.replace("phi = 2.0", "phi = 0.5"), &["solve-aux"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("phi must exceed 1") && err.contains("line 6"), "{err}");
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{}\n[solver]\nmax_iter = 2\n", twin((0.5, 0.5), (0.5, 0.5)));
    let o = run(dir.path(), &cfg, &["solve-regime"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("decay ratio"));
}

#[test]
fn identical_states_collapse_to_the_single_regime_barrier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin((0.7, 0.3), (0.5, 0.5));
    let regime = stdout(&run(dir.path(), &cfg, &["solve-regime"]));
    let single = stdout(&run(dir.path(), &cfg, &["solve-aux"]));
    let b = value(&single, "barrier");
    for s in ["a", "b"] {
        assert!((value(&regime, &format!("barrier.{s}")) - b).abs() < 1e-5);
    }
}

#[test]
fn symmetric_model_has_equal_barriers_and_fast_decay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin((0.6, 0.6), (0.4, 0.4)).replace("[problem]", "[jumps.a.b]\nkind = \"hyperexp\"\nweights = [1.0]\nrates = [3.0]\n\n[jumps.b.a]\nkind = \"hyperexp\"\nweights = [1.0]\nrates = [3.0]\n\n[problem]");
    let o = run(dir.path(), &cfg, &["solve-regime"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!((value(&text, "barrier.a") - value(&text, "barrier.b")).abs() < 1e-9);
    assert!(value(&text, "max_decay_ratio") <= value(&text, "beta") + 0.05);
}

#[test]
fn simulate_is_deterministic_and_barriers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin((0.7, 0.3), (0.5, 0.6));
    let args = ["simulate", "--paths", "400", "--seed", "11", "--x0", "0.5", "--state", "b"];
    let a = run(dir.path(), &cfg, &args);
    let b = run(dir.path(), &cfg, &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("mode,state,x0,barriers,mean,std_error,analytic\n"));

    let report = stdout(&run(dir.path(), &cfg, &["solve-regime"]));
    let saved = dir.path().join("report.txt");
    std::fs::write(&saved, &report).unwrap();
    let c = run(dir.path(), &cfg, &[&args[..], &["--barriers-from", saved.to_str().unwrap()]].concat());
    assert_eq!(a.stdout, c.stdout);
    let states = vec!["a".to_string(), "b".to_string()];
    assert_eq!(parse_barriers(&report, &states).map(|v| v.len()), Some(2));
}

#[test]
fn perturbed_barriers_do_not_beat_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin((0.7, 0.3), (0.5, 0.6));
    let report = stdout(&run(dir.path(), &cfg, &["solve-regime"]));
    let b: Vec<f64> = ["a", "b"].iter().map(|s| value(&report, &format!("barrier.{s}"))).collect();
    let sim = |bs: &str| {
        let o = stdout(&run(dir.path(), &cfg, &["simulate", "--paths", "20000", "--x0", "0.4", "--barriers", bs]));
        let row: Vec<String> = o.lines().nth(1).unwrap().split(',').map(String::from).collect();
        (row[4].parse::<f64>().unwrap(), row[5].parse::<f64>().unwrap())
    };
    let (opt, se) = sim(&format!("{},{}", b[0], b[1]));
    let (pert, se_p) = sim(&format!("{},{}", 1.3 * b[0], 1.3 * b[1]));
    assert!(pert <= opt + 3.0 * se.max(se_p), "{pert} vs {opt}");
}

#[test]
fn verify_passes_on_the_sinh_model_and_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SINH, &["verify", "--paths", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    // a single path cannot match the analytic values
    let o = run(dir.path(), SINH, &["verify", "--paths", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL check=") && l.contains("model=sinh")));
}

#[test]
fn curve_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &twin((0.7, 0.3), (0.5, 0.6)), &["curve"]);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("x,V_a,V_b"));
    assert_eq!(text.lines().count(), 2002);
}
