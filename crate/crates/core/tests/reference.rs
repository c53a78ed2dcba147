use apnn::physics::{ProblemId, ProblemSpec};
use apnn::reference::{
    sample_reference, solve_diffusion_limit, solve_kinetic, solve_stationary, DiffusionConfig, GridSolution,
    KineticConfig, Quantity, ReferenceError,
};

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn last(sol: &GridSolution, q: Quantity) -> Vec<f64> {
    sol.slice(q, sol.times.len() - 1).unwrap().to_vec()
}

fn kinetic(n_x: usize, n_t: usize) -> KineticConfig {
    KineticConfig { n_x, n_t, n_mu: 8, save_every: n_t, ..Default::default() }
}

/// `T + T⁴/3 = (4/3)(1 − x)` by Newton.
fn p2_limit(x: f64) -> f64 {
    let mut t: f64 = 1.0 - x;
    for _ in 0..60 {
        let f = t + t.powi(4) / 3.0 - 4.0 / 3.0 * (1.0 - x);
        t -= f / (1.0 + 4.0 / 3.0 * t.powi(3));
    }
    t
}

#[test]
fn kinetic_solver_approaches_diffusion_limit() {
    for (id, q) in [(ProblemId::P1, Quantity::Rho), (ProblemId::P3, Quantity::T), (ProblemId::P4, Quantity::T)] {
        let spec = ProblemSpec::with_epsilon(id, 1e-3);
        let k = solve_kinetic(&spec, &kinetic(100, 200)).unwrap();
        let d = solve_diffusion_limit(&spec, &DiffusionConfig { n_x: 100, n_t: 200, save_every: 200, ..Default::default() })
            .unwrap();
        let err = rel_l2(&last(&k, q), &last(&d, q));
        assert!(err <= 1e-2, "{id:?}: {err}");
    }
}

#[test]
fn kinetic_solver_differs_from_diffusion_at_moderate_knudsen() {
    let spec = ProblemSpec::with_epsilon(ProblemId::P1, 0.1);
    let k = solve_kinetic(&spec, &KineticConfig { n_mu: 16, ..kinetic(100, 200) }).unwrap();
    assert!(k.rho.iter().all(|&v| v >= 0.0));
    let d = solve_diffusion_limit(&spec, &DiffusionConfig { n_x: 100, n_t: 200, save_every: 200, ..Default::default() }).unwrap();
    let err = rel_l2(&last(&k, Quantity::Rho), &last(&d, Quantity::Rho));
    assert!(err > 0.02, "{err}");
}

/// Averages pairs of fine cells onto the coarse grid.
fn restrict(fine: &[f64]) -> Vec<f64> {
    fine.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

#[test]
fn spatial_self_convergence_is_second_order() {
    let spec = ProblemSpec::with_epsilon(ProblemId::P3, 1.0);
    let sols: Vec<Vec<f64>> =
        [40, 80, 160].iter().map(|&n| last(&solve_kinetic(&spec, &kinetic(n, 50)).unwrap(), Quantity::T)).collect();
    let d1 = rel_l2(&restrict(&sols[1]), &sols[0]);
    let d2 = rel_l2(&restrict(&sols[2]), &sols[1]);
    let ratio = d1 / d2;
    assert!((1.7..=2.3).contains(&ratio.log2()), "ratio {ratio} ({d1:e}, {d2:e})");
}

#[test]
fn temporal_self_convergence_is_first_order() {
    let spec = ProblemSpec::with_epsilon(ProblemId::P3, 1.0);
    let sols: Vec<Vec<f64>> =
        [25, 50, 100].iter().map(|&n| last(&solve_kinetic(&spec, &kinetic(40, n)).unwrap(), Quantity::T)).collect();
    let ratio = rel_l2(&sols[1], &sols[0]) / rel_l2(&sols[2], &sols[1]);
    assert!((0.7..=1.3).contains(&ratio.log2()), "ratio {ratio}");
}

#[test]
fn steady_solution_matches_limit_oracle() {
    let spec = ProblemSpec::catalog(ProblemId::P2);
    let sol = solve_stationary(&spec, &KineticConfig { n_x: 200, n_mu: 16, ..Default::default() }).unwrap();
    let t = sol.temperature.as_ref().unwrap();
    let exact: Vec<f64> = sol.x.iter().map(|&x| p2_limit(x)).collect();
    let err = rel_l2(t, &exact);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn steady_solution_is_monotone_at_unit_knudsen() {
    let spec = ProblemSpec::with_epsilon(ProblemId::P2, 1.0);
    let sol = solve_stationary(&spec, &KineticConfig { n_x: 200, ..Default::default() }).unwrap();
    let t = sol.temperature.as_ref().unwrap();
    assert!(t.windows(2).all(|w| w[1] < w[0]));
    assert!(sol.rho.windows(2).all(|w| w[1] < w[0]));
    assert!(t.iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn sampling_reproduces_grid_values() {
    let spec = ProblemSpec::with_epsilon(ProblemId::P4, 1.0);
    let sol = solve_kinetic(&spec, &KineticConfig { n_x: 50, n_t: 100, n_mu: 8, save_every: 10, ..Default::default() }).unwrap();
    let k = 4;
    let pts: Vec<(f64, f64)> = sol.x.iter().map(|&x| (sol.times[k], x)).collect();
    let got = sample_reference(&sol, Quantity::T, &pts).unwrap();
    assert_eq!(got, sol.slice(Quantity::T, k).unwrap());
    let err = sample_reference(&sol, Quantity::T, &[(0.5, 0.0)]).unwrap_err();
    assert!(matches!(err, ReferenceError::Extrapolation { .. }));
}

#[test]
fn radiation_temperature_is_consistent_with_rho() {
    let spec = ProblemSpec::with_epsilon(ProblemId::P4, 1.0);
    let sol = solve_kinetic(&spec, &kinetic(40, 40)).unwrap();
    let ac = spec.a * spec.c;
    for (tr, rho) in sol.radiation_temperature.as_ref().unwrap().iter().zip(&sol.rho) {
        assert!((tr - (2.0 * rho / ac).powf(0.25)).abs() < 1e-12);
    }
    // The cold source cools the right end below the initial unit temperature.
    let t = last(&sol, Quantity::T);
    assert!(t[t.len() - 1] < t[0] && t[0] <= 1.0 + 1e-12);
}

#[test]
fn invalid_configuration_is_rejected() {
    let spec = ProblemSpec::catalog(ProblemId::P3);
    assert!(matches!(solve_kinetic(&spec, &kinetic(2, 10)), Err(ReferenceError::Config(_))));
    assert!(matches!(solve_stationary(&spec, &kinetic(10, 10)), Err(ReferenceError::Unsupported { .. })));
    assert!(matches!(solve_kinetic(&ProblemSpec::catalog(ProblemId::P2), &kinetic(10, 10)), Err(ReferenceError::Unsupported { .. })));
}
