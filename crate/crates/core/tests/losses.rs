//! Loss residuals against an independent pointwise re-implementation,
//! structural invariants and gradient checks.

use apnn::autodiff::{Jet, Scalar};
use apnn::losses::{
    apnn_eo_residuals, apnn_mm_residuals, evaluate, evaluate_residuals, pinn_residuals, BoundarySample,
    InitialSample, InteriorSample, LossWeights, Method, NetSet, Role, SampleSet,
};
use apnn::network::{ResNet, WrapperKind};
use apnn::physics::{ProblemId, ProblemSpec};
use apnn::quadrature::{gauss_legendre, Interval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nets(method: Method, spec: &ProblemSpec, seed: u64) -> NetSet {
    NetSet::init(method, spec, |_| (6, 3), seed).unwrap()
}

/// Raw network jet with `t` and `x` seeded.
fn raw(net: &ResNet, spec: &ProblemSpec, t: f64, x: f64, mu: Option<f64>) -> Jet {
    let mut input = Vec::new();
    if !spec.is_stationary() {
        input.push(Jet::new(t, 1.0, 0.0, 0.0));
    }
    input.push(Jet::new(x, 0.0, 1.0, 0.0));
    if let Some(m) = mu {
        input.push(Jet::constant(m));
    }
    net.forward_scalar(&input).unwrap()
}

fn wrapped(set: &NetSet, role: Role, spec: &ProblemSpec, t: f64, x: f64, mu: f64) -> Jet {
    let f = set.get(role).unwrap();
    let r = |m: f64| raw(&f.net, spec, t, x, role.is_angular().then_some(m));
    match f.wrapper {
        WrapperKind::Plain => r(mu),
        WrapperKind::Positive => r(mu).softplus(),
        WrapperKind::EvenPositive => (r(mu) + r(-mu)).softplus(),
        WrapperKind::Odd => r(mu) - r(-mu),
        WrapperKind::MeanZero => {
            let rule = gauss_legendre(16, Interval::Full).unwrap();
            let mut mean = Jet::ZERO;
            for (&m, &w) in rule.nodes().iter().zip(rule.weights()) {
                mean = mean + r(m) * (0.5 * w);
            }
            r(mu) - mean
        }
    }
}

/// `(nodes, bracket weights)` of the full or half rule.
fn rule(interval: Interval) -> (Vec<f64>, Vec<f64>) {
    let r = gauss_legendre(16, interval).unwrap();
    let s = if interval == Interval::Full { 0.5 } else { 1.0 };
    (r.nodes().to_vec(), r.weights().iter().map(|w| s * w).collect())
}

fn oracle_mm(set: &NetSet, spec: &ProblemSpec, s: InteriorSample) -> Vec<f64> {
    let (e, c, sg, s0, ac, cv) = (spec.epsilon, spec.c, spec.sigma, spec.sigma0.sqrt(), spec.a * spec.c, spec.cv);
    let rho = wrapped(set, Role::Rho, spec, s.t, s.x, 0.0);
    let g = wrapped(set, Role::G, spec, s.t, s.x, s.mu);
    let (nodes, w) = rule(Interval::Full);
    let mut mgx = 0.0;
    for (m, wk) in nodes.iter().zip(&w) {
        mgx += wk * m * wrapped(set, Role::G, spec, s.t, s.x, *m).dx;
    }
    let micro = e * (s.mu * g.dx - mgx) + s0 * s.mu * rho.dx + sg * g.v;
    if !spec.has_temperature() {
        return vec![rho.dt / c + mgx / s0, e * e / c * g.dt + micro];
    }
    let t = wrapped(set, Role::T, spec, s.t, s.x, 0.0);
    if spec.is_stationary() {
        return vec![mgx / s0 - t.dxx, micro, e * e * t.dxx - sg * (ac * t.v.powi(4) - rho.v)];
    }
    vec![
        rho.dt / c + mgx / s0 + 0.5 * cv * t.dt,
        e * e / c * g.dt + micro,
        e * e * cv * t.dt - sg * (2.0 * rho.v - ac * t.v.powi(4)),
    ]
}

fn oracle_eo(set: &NetSet, spec: &ProblemSpec, s: InteriorSample) -> (Vec<f64>, f64) {
    let (e, c, sg, s0, ac, cv) = (spec.epsilon, spec.c, spec.sigma, spec.sigma0.sqrt(), spec.a * spec.c, spec.cv);
    let rho = wrapped(set, Role::Rho, spec, s.t, s.x, 0.0);
    let r = wrapped(set, Role::R, spec, s.t, s.x, s.mu);
    let j = wrapped(set, Role::J, spec, s.t, s.x, s.mu);
    let (nodes, w) = rule(Interval::Half);
    let (mut mjx, mut rbar) = (0.0, 0.0);
    for (m, wk) in nodes.iter().zip(&w) {
        mjx += wk * m * wrapped(set, Role::J, spec, s.t, s.x, *m).dx;
        rbar += wk * wrapped(set, Role::R, spec, s.t, s.x, *m).v;
    }
    let constraint = rho.v - rbar;
    let odd = e * e / (c * s0) * j.dt + s.mu * r.dx + sg / s0 * j.v;
    if !spec.has_temperature() {
        let eqs = vec![
            e * e / c * r.dt + e * e / s0 * s.mu * j.dx - sg * (rho.v - r.v),
            odd,
            rho.dt / c + mjx / s0,
        ];
        return (eqs, constraint);
    }
    let t = wrapped(set, Role::T, spec, s.t, s.x, 0.0);
    let t4 = t.v.powi(4);
    let eqs = if spec.is_stationary() {
        vec![
            e * e / s0 * s.mu * j.dx - sg * (ac * t4 - r.v),
            s.mu * r.dx + sg / s0 * j.v,
            mjx / s0 - t.dxx,
            e * e * t.dxx - sg * (ac * t4 - rho.v),
        ]
    } else {
        vec![
            e * e / c * r.dt + e * e / s0 * s.mu * j.dx - sg * (0.5 * ac * t4 - r.v),
            odd,
            rho.dt / c + mjx / s0 + 0.5 * cv * t.dt,
            e * e * cv * t.dt - sg * (2.0 * rho.v - ac * t4),
        ]
    };
    (eqs, constraint)
}

fn oracle_pinn(set: &NetSet, spec: &ProblemSpec, s: InteriorSample) -> Vec<f64> {
    let (e, c, sg, ac, cv) = (spec.epsilon, spec.c, spec.sigma, spec.a * spec.c, spec.cv);
    let i = wrapped(set, Role::I, spec, s.t, s.x, s.mu);
    let (nodes, w) = rule(Interval::Full);
    let mean: f64 = nodes.iter().zip(&w).map(|(m, wk)| wk * wrapped(set, Role::I, spec, s.t, s.x, *m).v).sum();
    if !spec.has_temperature() {
        return vec![e * e / c * i.dt + e * s.mu * i.dx - sg * (mean - i.v)];
    }
    let t = wrapped(set, Role::T, spec, s.t, s.x, 0.0);
    vec![
        e * e / c * i.dt + e * s.mu * i.dx - sg * (0.5 * ac * t.v.powi(4) - i.v),
        e * e * cv * t.dt - sg * (2.0 * mean - ac * t.v.powi(4)),
    ]
}

fn random_interior(spec: &ProblemSpec, rng: &mut ChaCha8Rng, half: bool) -> InteriorSample {
    InteriorSample {
        t: rng.gen_range(0.0..spec.t_end.unwrap_or(1.0)),
        x: rng.gen_range(spec.x_left..spec.x_right),
        mu: if half { rng.gen_range(0.0..1.0) } else { rng.gen_range(-1.0..1.0) },
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
    }
}

fn all_specs() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::catalog(ProblemId::P1),
        ProblemSpec::catalog(ProblemId::P2),
        ProblemSpec::catalog(ProblemId::P3),
        ProblemSpec::with_epsilon(ProblemId::P3, 1e-3),
        ProblemSpec::catalog(ProblemId::P4),
    ]
}

#[test]
fn residuals_match_pointwise_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in all_specs() {
        let mm = nets(Method::Mm, &spec, 3);
        let eo = nets(Method::Eo, &spec, 4);
        let pinn = nets(Method::Pinn, &spec, 5);
        for _ in 0..5 {
            let s = random_interior(&spec, &mut rng, false);
            close(&apnn_mm_residuals(&mm, s, &spec).unwrap(), &oracle_mm(&mm, &spec, s), 1e-12);
            if !spec.is_stationary() {
                close(&pinn_residuals(&pinn, s, &spec).unwrap(), &oracle_pinn(&pinn, &spec, s), 1e-12);
            }
            let sh = InteriorSample { mu: s.mu.abs(), ..s };
            let (eqs, con) = apnn_eo_residuals(&eo, sh, &spec).unwrap();
            let (oe, oc) = oracle_eo(&eo, &spec, sh);
            close(&eqs, &oe, 1e-12);
            close(&[con], &[oc], 1e-12);
        }
    }
}

/// Net whose output is the constant `raw` (all weights zero).
fn constant_net(like: &ResNet, raw: f64) -> ResNet {
    let mut n = ResNet::zeros(*like.shape()).unwrap();
    let k = n.param_count();
    n.params_mut()[k - 1] = raw;
    n
}

fn softplus_inv(y: f64) -> f64 {
    y.exp_m1().ln()
}

/// Equilibrium nets at temperature `temp`.
fn equilibrium(method: Method, spec: &ProblemSpec, temp: f64) -> NetSet {
    let mut set = nets(method, spec, 1);
    let emission = if spec.is_stationary() { spec.a * spec.c } else { 0.5 * spec.a * spec.c } * temp.powi(4);
    let rho = if spec.has_temperature() { emission } else { 0.7 };
    for f in &mut set.fields {
        let raw = match f.role {
            Role::T => softplus_inv(temp),
            Role::Rho | Role::I => softplus_inv(rho),
            Role::R => softplus_inv(rho) / 2.0,
            Role::G | Role::J => 0.3,
        };
        f.net = constant_net(&f.net, raw);
    }
    set
}

#[test]
fn equilibrium_annihilates_interior_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for spec in all_specs() {
        for method in [Method::Pinn, Method::Mm, Method::Eo] {
            if method == Method::Pinn && spec.is_stationary() {
                continue;
            }
            let set = equilibrium(method, &spec, 0.8);
            let samples = SampleSet {
                interior: (0..6).map(|_| random_interior(&spec, &mut rng, method == Method::Eo)).collect(),
                ..Default::default()
            };
            let b = evaluate_residuals(&set, method, &spec, &samples, 16).unwrap();
            for term in b.interior.iter().chain(&b.constraint) {
                for v in term {
                    assert!(v.abs() <= 1e-12, "{:?} {method:?}: {v}", spec.id);
                }
            }
        }
    }
}

#[test]
fn periodic_boundary_vanishes_for_x_independent_fields() {
    let spec = ProblemSpec::catalog(ProblemId::P3);
    for method in [Method::Mm, Method::Eo, Method::Pinn] {
        let set = equilibrium(method, &spec, 0.9);
        let samples = SampleSet {
            boundary: vec![BoundarySample { condition: 0, t: 0.2, mu: -0.4 }, BoundarySample { condition: 0, t: 0.3, mu: 0.7 }],
            ..Default::default()
        };
        let b = evaluate_residuals(&set, method, &spec, &samples, 16).unwrap();
        assert_eq!(b.boundary.len(), 2);
        assert!(b.boundary.iter().flatten().all(|v| v.abs() < 1e-13));
    }
}

#[test]
fn boundary_and_initial_targets() {
    // P4 Planckian target: a net reconstructing zero leaves −½ac(0.1)⁴.
    let spec = ProblemSpec::catalog(ProblemId::P4);
    let mut set = nets(Method::Eo, &spec, 7);
    for f in &mut set.fields {
        f.net = constant_net(&f.net, if f.role == Role::R { -400.0 } else { 0.0 });
    }
    let samples = SampleSet {
        boundary: vec![BoundarySample { condition: 1, t: 0.5, mu: -0.3 }],
        initial: vec![InitialSample { x: 0.1, mu: 0.2 }],
        ..Default::default()
    };
    let b = evaluate_residuals(&set, Method::Eo, &spec, &samples, 16).unwrap();
    let target = 0.5 * 0.01372 * 29.98 * 1e-4;
    assert!((b.boundary[1][0] + target).abs() < 1e-15);
    assert!(b.boundary[0].is_empty());
    // T net outputs softplus(0) = ln 2, T₀ = 1; r ≈ 0 so I − I₀ ≈ −½ac.
    assert!((b.initial[0][0] - (2f64.ln() - 1.0)).abs() < 1e-14);
    assert!((b.initial[1][0] + 0.5 * 0.01372 * 29.98).abs() < 1e-12);

    // P1 left inflow with a reconstruction equal to 1.
    let p1 = ProblemSpec::catalog(ProblemId::P1);
    let mut mm = nets(Method::Mm, &p1, 9);
    for f in &mut mm.fields {
        f.net = constant_net(&f.net, if f.role == Role::Rho { softplus_inv(1.0) } else { 0.2 });
    }
    let samples = SampleSet {
        boundary: vec![BoundarySample { condition: 0, t: 0.05, mu: 0.5 }],
        initial: vec![InitialSample { x: 0.4, mu: -0.1 }],
        ..Default::default()
    };
    let b = evaluate_residuals(&mm, Method::Mm, &p1, &samples, 16).unwrap();
    assert!(b.boundary[0][0].abs() < 1e-14);
    assert_eq!(b.initial.len(), 1);
    assert!((b.initial[0][0] - 1.0).abs() < 1e-14);

    // Incoming side is enforced.
    let bad = SampleSet { boundary: vec![BoundarySample { condition: 0, t: 0.0, mu: -0.5 }], ..Default::default() };
    assert!(evaluate_residuals(&mm, Method::Mm, &p1, &bad, 16).is_err());
}

#[test]
fn eo_residuals_are_affine_in_epsilon_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for id in [ProblemId::P1, ProblemId::P2, ProblemId::P3] {
        let base = ProblemSpec::catalog(id);
        let set = nets(Method::Eo, &base, 13);
        let s = random_interior(&base, &mut rng, true);
        let at = |e: f64| apnn_eo_residuals(&set, s, &ProblemSpec { epsilon: e, ..base.clone() }).unwrap().0;
        let eps = [1e-1, 1e-2, 1e-3];
        let vals: Vec<Vec<f64>> = eps.iter().map(|&e| at(e)).collect();
        let limit = at(0.0);
        for k in 0..limit.len() {
            let slopes: Vec<f64> = eps.iter().zip(&vals).map(|(e, v)| (v[k] - limit[k]) / (e * e)).collect();
            for s in &slopes[1..] {
                assert!((s - slopes[0]).abs() <= 1e-6 * slopes[0].abs().max(1e-300), "{id:?} eq {k}: {slopes:?}");
            }
        }
    }
}

#[test]
fn eo_formal_limit() {
    let spec = ProblemSpec { epsilon: 0.0, ..ProblemSpec::catalog(ProblemId::P3) };
    let set = nets(Method::Eo, &spec, 17);
    let s = InteriorSample { t: 0.2, x: 0.6, mu: 0.4 };
    let (eqs, _) = apnn_eo_residuals(&set, s, &spec).unwrap();
    let t = wrapped(&set, Role::T, &spec, s.t, s.x, 0.0);
    let r = wrapped(&set, Role::R, &spec, s.t, s.x, s.mu);
    let j = wrapped(&set, Role::J, &spec, s.t, s.x, s.mu);
    let s0 = spec.sigma0.sqrt();
    assert!((eqs[0] + spec.sigma * (0.5 * spec.a * spec.c * t.v.powi(4) - r.v)).abs() < 1e-12);
    assert!((eqs[1] - (s.mu * r.dx + spec.sigma / s0 * j.v)).abs() < 1e-12);
}

#[test]
fn mm_micro_equation_at_zero_epsilon() {
    let spec = ProblemSpec { epsilon: 0.0, ..ProblemSpec::catalog(ProblemId::P3) };
    let set = nets(Method::Mm, &spec, 19);
    let s = InteriorSample { t: 0.1, x: 1.2, mu: -0.6 };
    let eqs = apnn_mm_residuals(&set, s, &spec).unwrap();
    let rho = wrapped(&set, Role::Rho, &spec, s.t, s.x, 0.0);
    let g = wrapped(&set, Role::G, &spec, s.t, s.x, s.mu);
    assert!((eqs[1] - (spec.sigma0.sqrt() * s.mu * rho.dx + spec.sigma * g.v)).abs() < 1e-12);
}

#[test]
fn constraint_vanishes_when_rho_is_the_half_average() {
    let spec = ProblemSpec::catalog(ProblemId::P3);
    let mut set = nets(Method::Eo, &spec, 23);
    // Make r independent of (t, x) so ⟨r⟩ is a constant representable by ρ.
    let ri = set.index_of(Role::R).unwrap();
    let shape = *set.fields[ri].net.shape();
    let mut p = set.fields[ri].net.params().to_vec();
    for row in 0..shape.width {
        p[row * shape.input_dim] = 0.0;
        p[row * shape.input_dim + 1] = 0.0;
    }
    set.fields[ri].net = ResNet::from_params(shape, p).unwrap();
    let (nodes, w) = rule(Interval::Half);
    let rbar: f64 = nodes.iter().zip(&w).map(|(m, wk)| wk * wrapped(&set, Role::R, &spec, 0.0, 0.0, *m).v).sum();
    let rho_i = set.index_of(Role::Rho).unwrap();
    set.fields[rho_i].net = constant_net(&set.fields[rho_i].net, softplus_inv(rbar));
    for &(t, x) in &[(0.1, 0.3), (0.4, 1.9)] {
        let (_, con) = apnn_eo_residuals(&set, InteriorSample { t, x, mu: 0.5 }, &spec).unwrap();
        assert!(con.abs() <= 1e-13, "{con}");
    }
}

fn sample_set(spec: &ProblemSpec, method: Method, rng: &mut ChaCha8Rng) -> SampleSet {
    let interior = (0..4).map(|_| random_interior(spec, rng, method == Method::Eo)).collect();
    let mut boundary = Vec::new();
    for (k, bc) in spec.boundaries.iter().enumerate() {
        let mut mu: f64 = rng.gen_range(0.05..1.0);
        if bc.side == apnn::physics::Side::Right && bc.kind != apnn::physics::BoundaryKind::Periodic {
            mu = -mu;
        }
        boundary.push(BoundarySample { condition: k, t: rng.gen_range(0.0..spec.t_end.unwrap_or(1.0)), mu });
    }
    let initial = if spec.is_stationary() {
        Vec::new()
    } else {
        (0..3).map(|_| InitialSample { x: rng.gen_range(spec.x_left..spec.x_right), mu: rng.gen_range(-1.0..1.0) }).collect()
    };
    SampleSet { interior, boundary, initial }
}

#[test]
fn risk_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for spec in all_specs() {
        for method in [Method::Pinn, Method::Mm, Method::Eo] {
            if method == Method::Pinn && spec.is_stationary() {
                continue;
            }
            let mut set = NetSet::init(method, &spec, |_| (5, 2), 41).unwrap();
            let samples = sample_set(&spec, method, &mut rng);
            let w = LossWeights::default();
            let out = evaluate(&set, method, &spec, &samples, &w, 16, true).unwrap();
            let analytic: Vec<f64> = out.grads.concat();
            let theta = set.flat_params();
            let h = 1e-5;
            let mut max_err: f64 = 0.0;
            let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for k in 0..theta.len() {
                let mut tp = theta.clone();
                tp[k] += h;
                set.set_flat_params(&tp);
                let fp = evaluate(&set, method, &spec, &samples, &w, 16, false).unwrap().total;
                tp[k] -= 2.0 * h;
                set.set_flat_params(&tp);
                let fm = evaluate(&set, method, &spec, &samples, &w, 16, false).unwrap().total;
                let fd = (fp - fm) / (2.0 * h);
                max_err = max_err.max((analytic[k] - fd).abs() / (fd.abs() + 1e-6 * scale));
            }
            set.set_flat_params(&theta);
            assert!(max_err < 1e-5, "{:?} {method:?}: {max_err}", spec.id);
        }
    }
}
