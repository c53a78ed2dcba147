//! Quick invariant checks run by the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::relative_l2;
use crate::losses::{evaluate, evaluate_residuals, InteriorSample, LossWeights, Method, NetSet, Role, SampleSet};
use crate::network::{wrap_eval, ResNet, ShapeSpec, WrapperKind};
use crate::physics::{InitialData, ProblemId, ProblemSpec};
use crate::quadrature::{gauss_legendre, Interval, DEFAULT_POINTS};
use crate::reference::{solve_kinetic, KineticConfig, Quantity};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> SelfCheck {
    SelfCheck { name, passed: value <= tol, detail: format!("{value:.3e} (tolerance {tol:.0e})") }
}

fn quadrature_exactness() -> SelfCheck {
    let rule = gauss_legendre(DEFAULT_POINTS, Interval::Full).expect("default rule");
    let worst = (0..=31)
        .map(|k| {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            (rule.integrate(|m| m.powi(k)) - exact).abs()
        })
        .fold(0.0, f64::max);
    check("quadrature exactness", worst, 1e-12)
}

fn wrapper_structure() -> Vec<SelfCheck> {
    let net = ResNet::init_xavier(ShapeSpec::new(3, 16, 3, 1), 5).expect("shape");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut parity, mut mean) = (0.0f64, 0.0f64);
    let rule = gauss_legendre(DEFAULT_POINTS, Interval::Full).expect("default rule");
    for _ in 0..20 {
        let c = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let m: f64 = rng.gen_range(0.0..1.0);
        let e = |kind, mu| wrap_eval(&net, kind, &c, Some(mu)).expect("eval");
        parity = parity.max((e(WrapperKind::EvenPositive, m) - e(WrapperKind::EvenPositive, -m)).abs());
        parity = parity.max((e(WrapperKind::Odd, m) + e(WrapperKind::Odd, -m)).abs());
        let avg: f64 = rule.nodes().iter().zip(rule.weights()).map(|(&mk, &w)| 0.5 * w * e(WrapperKind::MeanZero, mk)).sum();
        mean = mean.max(avg.abs());
    }
    vec![check("parity of even/odd wrappers", parity, 0.0), check("mean-zero wrapper average", mean, 1e-13)]
}

fn equilibrium_nets(method: Method, spec: &ProblemSpec, temp: f64) -> NetSet {
    let mut set = NetSet::init(method, spec, |_| (8, 2), 1).expect("shape");
    let emission = if spec.is_stationary() { 1.0 } else { 0.5 } * spec.a * spec.c * temp.powi(4);
    let rho = if spec.has_temperature() { emission } else { 0.7 };
    let softplus_inv = |y: f64| y.exp_m1().ln();
    for f in &mut set.fields {
        let raw = match f.role {
            Role::T => softplus_inv(temp),
            Role::Rho | Role::I => softplus_inv(rho),
            Role::R => softplus_inv(rho) / 2.0,
            Role::G | Role::J => 0.3,
        };
        let mut n = ResNet::zeros(*f.net.shape()).expect("shape");
        let k = n.param_count();
        n.params_mut()[k - 1] = raw;
        f.net = n;
    }
    set
}

fn equilibrium_annihilation() -> SelfCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for id in [ProblemId::P1, ProblemId::P2, ProblemId::P3, ProblemId::P4] {
        let spec = ProblemSpec::catalog(id);
        for method in [Method::Pinn, Method::Mm, Method::Eo] {
            let set = equilibrium_nets(method, &spec, 0.8);
            let interior = (0..4)
                .map(|_| InteriorSample {
                    t: rng.gen_range(0.0..spec.t_end.unwrap_or(1.0)),
                    x: rng.gen_range(spec.x_left..spec.x_right),
                    mu: if method == Method::Eo { rng.gen_range(0.0..1.0) } else { rng.gen_range(-1.0..1.0) },
                })
                .collect();
            let samples = SampleSet { interior, ..Default::default() };
            let b = evaluate_residuals(&set, method, &spec, &samples, DEFAULT_POINTS).expect("residuals");
            for v in b.interior.iter().chain(&b.constraint).flatten() {
                worst = worst.max(v.abs());
            }
        }
    }
    check("equilibrium annihilates interior residuals", worst, 1e-12)
}

fn gradient_check() -> SelfCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = ProblemSpec::with_epsilon(ProblemId::P3, 0.1);
    let mut worst = 0.0f64;
    for method in [Method::Pinn, Method::Mm, Method::Eo] {
        let mut set = NetSet::init(method, &spec, |_| (4, 2), 2).expect("shape");
        let interior = (0..3)
            .map(|_| InteriorSample {
                t: rng.gen_range(0.0..0.5),
                x: rng.gen_range(0.0..2.0),
                mu: rng.gen_range(0.0..1.0),
            })
            .collect();
        let samples = SampleSet { interior, ..Default::default() };
        let w = LossWeights::default();
        let out = evaluate(&set, method, &spec, &samples, &w, DEFAULT_POINTS, true).expect("risk");
        let analytic = out.grads.concat();
        let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let theta = set.flat_params();
        let h = 1e-5;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            tp[k] += h;
            set.set_flat_params(&tp);
            let fp = evaluate(&set, method, &spec, &samples, &w, DEFAULT_POINTS, false).expect("risk").total;
            tp[k] -= 2.0 * h;
            set.set_flat_params(&tp);
            let fm = evaluate(&set, method, &spec, &samples, &w, DEFAULT_POINTS, false).expect("risk").total;
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((analytic[k] - fd).abs() / (fd.abs() + 1e-6 * scale));
        }
        set.set_flat_params(&theta);
    }
    check("risk gradient vs central differences", worst, 1e-5)
}

fn metric_examples() -> SelfCheck {
    let a = relative_l2(&[1.0, 2.0], &[1.0, 1.0]).unwrap_or(f64::NAN);
    let b = relative_l2(&[2.0, 4.0], &[1.0, 2.0]).unwrap_or(f64::NAN);
    check("relative l2 examples", (a - 0.5f64.sqrt()).abs().max((b - 1.0).abs()), 1e-15)
}

fn reference_equilibrium() -> SelfCheck {
    let mut spec = ProblemSpec::with_epsilon(ProblemId::P3, 0.1);
    spec.initial = Some(InitialData::Equilibrium { temperature: 0.9 });
    let cfg = KineticConfig { n_x: 16, n_t: 5, n_mu: 4, save_every: 5, ..Default::default() };
    let worst = match solve_kinetic(&spec, &cfg) {
        Ok(sol) => sol.slice(Quantity::T, sol.times.len() - 1).map_or(f64::NAN, |t| {
            t.iter().fold(0.0f64, |m, v| m.max((v - 0.9).abs()))
        }),
        Err(_) => f64::NAN,
    };
    SelfCheck { name: "reference keeps equilibrium", passed: worst <= 1e-12, detail: format!("{worst:.3e}") }
}

/// Runs every check; none of them takes more than a fraction of a second.
pub fn run_selftest() -> Vec<SelfCheck> {
    let mut out = vec![quadrature_exactness()];
    out.extend(wrapper_structure());
    out.push(equilibrium_annihilation());
    out.push(gradient_check());
    out.push(metric_examples());
    out.push(reference_equilibrium());
    out
}
