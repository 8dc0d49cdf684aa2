use divcap_core::{AuxProblem, ConcavePayoff, JumpComponent, LevySpec};
use divcap_sim::{simulate_aux_npv, SimConfig};

#[test]
fn diffusive_npv_with_payoff_matches_closed_form() {
    let spec = LevySpec::new(-0.3, 0.9, 1.0, vec![JumpComponent { weight: 1.0, rate: 2.5 }]).unwrap();
    let payoff = ConcavePayoff::new(&[(0.0, 0.2), (0.8, 0.9)], 0.3).unwrap();
    let prob = AuxProblem::new(spec.clone(), 0.4, 0.6, 1.7, payoff.clone()).unwrap();
    let sol = prob.solve().unwrap();
    let b = sol.barrier();
    let cfg = SimConfig { n_paths: 20_000, dt: 2e-3, t_max: SimConfig::min_horizon(1.0), seed: 8, ..Default::default() };
    for x in [0.1 * b, 0.6 * b] {
        let est = simulate_aux_npv(&spec, payoff.as_piecewise(), 0.4, 0.6, 1.7, b, x, &cfg).unwrap();
        assert!(est.agrees_with(sol.value(x), 3.0), "{x}: {est:?} vs {}", sol.value(x));
    }
}

#[test]
fn antithetic_pairs_reduce_the_error() {
    let spec = LevySpec::brownian(0.1, 1.0).unwrap();
    let id = ConcavePayoff::identity();
    let base = SimConfig { n_paths: 4000, dt: 1e-2, t_max: SimConfig::min_horizon(1.0), seed: 3, ..Default::default() };
    let plain = simulate_aux_npv(&spec, id.as_piecewise(), 0.0, 1.0, 2.0, 1.0, 0.5, &base).unwrap();
    let anti = simulate_aux_npv(&spec, id.as_piecewise(), 0.0, 1.0, 2.0, 1.0, 0.5, &SimConfig { antithetic: true, ..base }).unwrap();
    assert_eq!(anti.n_effective, 2000);
    assert!(anti.std_error < plain.std_error);
}
