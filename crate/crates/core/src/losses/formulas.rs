//! Interior residual formulas on tape variables.

use crate::autodiff::{Tape, Var};
use crate::physics::{ProblemId, ProblemSpec};

/// Which family of equations a problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Regime {
    /// Linear transport with scattering towards `⟨I⟩`, no temperature.
    Linear,
    /// Time-dependent gray system.
    Gray,
    /// Steady gray system with emission `acT⁴`.
    Steady,
}

impl Regime {
    pub fn of(spec: &ProblemSpec) -> Self {
        if spec.is_stationary() {
            Regime::Steady
        } else if spec.id == ProblemId::P1 {
            Regime::Linear
        } else {
            Regime::Gray
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Coef {
    pub eps: f64,
    pub c: f64,
    pub sigma: f64,
    pub s0: f64,
    pub ac: f64,
    pub cv: f64,
}

impl Coef {
    pub fn of(spec: &ProblemSpec) -> Self {
        Coef {
            eps: spec.epsilon,
            c: spec.c,
            sigma: spec.sigma,
            s0: spec.sigma0.sqrt(),
            ac: spec.a * spec.c,
            cv: spec.cv,
        }
    }
}

/// Angular nodes with bracket weights, so `⟨f⟩ = Σ wₖ f(μₖ)`.
#[derive(Debug, Clone)]
pub(crate) struct Bracket {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A wrapped field at one sample: its jet at the sample angle and its jets
/// at the bracket nodes (empty for non-angular fields).
#[derive(Clone)]
pub(crate) struct Field<'t> {
    pub at: Var<'t>,
    pub nodes: Vec<Var<'t>>,
}

fn bracket<'t>(tape: &'t Tape, b: &Bracket, vals: impl Iterator<Item = Var<'t>>) -> Var<'t> {
    tape.sum(b.weights.iter().zip(vals).map(|(&w, v)| v * w))
}

/// `⟨μ ∂ₓf⟩` over the bracket.
fn mu_dx_avg<'t>(tape: &'t Tape, b: &Bracket, f: &Field<'t>) -> Var<'t> {
    bracket(tape, b, f.nodes.iter().zip(&b.nodes).map(|(v, &m)| v.dx() * m))
}

/// `⟨f⟩` over the bracket, values only.
fn avg<'t>(tape: &'t Tape, b: &Bracket, f: &Field<'t>) -> Var<'t> {
    bracket(tape, b, f.nodes.iter().map(|v| v.val()))
}

fn t4<'t>(t: Var<'t>) -> Var<'t> {
    t.val().powi(4)
}

pub(crate) fn pinn<'t>(
    tape: &'t Tape,
    k: Coef,
    regime: Regime,
    mu: f64,
    full: &Bracket,
    i: &Field<'t>,
    temp: Option<Var<'t>>,
) -> Vec<Var<'t>> {
    let e2 = k.eps * k.eps;
    let iv = i.at;
    let mean = avg(tape, full, i);
    match (regime, temp) {
        (Regime::Linear, _) | (_, None) => {
            vec![iv.dt() * (e2 / k.c) + iv.dx() * (k.eps * mu) - (mean - iv.val()) * k.sigma]
        }
        (Regime::Gray, Some(t)) => vec![
            iv.dt() * (e2 / k.c) + iv.dx() * (k.eps * mu) - (t4(t) * (0.5 * k.ac) - iv.val()) * k.sigma,
            t.dt() * (e2 * k.cv) - (mean * 2.0 - t4(t) * k.ac) * k.sigma,
        ],
        (Regime::Steady, Some(t)) => vec![
            iv.dx() * (k.eps * mu) - (t4(t) * k.ac - iv.val()) * k.sigma,
            t.dxx() * e2 - (t4(t) * k.ac - mean) * k.sigma,
        ],
    }
}

pub(crate) fn mm<'t>(
    tape: &'t Tape,
    k: Coef,
    regime: Regime,
    mu: f64,
    full: &Bracket,
    rho: Var<'t>,
    temp: Option<Var<'t>>,
    g: &Field<'t>,
) -> Vec<Var<'t>> {
    let e2 = k.eps * k.eps;
    let mgx = mu_dx_avg(tape, full, g);
    let gv = g.at;
    let micro_stream = (gv.dx() * mu - mgx) * k.eps + rho.dx() * (k.s0 * mu) + gv.val() * k.sigma;
    match (regime, temp) {
        (Regime::Linear, _) | (_, None) => vec![rho.dt() * (1.0 / k.c) + mgx * (1.0 / k.s0), gv.dt() * (e2 / k.c) + micro_stream],
        (Regime::Gray, Some(t)) => vec![
            rho.dt() * (1.0 / k.c) + mgx * (1.0 / k.s0) + t.dt() * (0.5 * k.cv),
            gv.dt() * (e2 / k.c) + micro_stream,
            t.dt() * (e2 * k.cv) - (rho.val() * 2.0 - t4(t) * k.ac) * k.sigma,
        ],
        (Regime::Steady, Some(t)) => vec![
            mgx * (1.0 / k.s0) - t.dxx(),
            micro_stream,
            t.dxx() * e2 - (t4(t) * k.ac - rho.val()) * k.sigma,
        ],
    }
}

/// Returns `(equations, constraint ρ − ⟨r⟩)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn eo<'t>(
    tape: &'t Tape,
    k: Coef,
    regime: Regime,
    mu: f64,
    half: &Bracket,
    rho: Var<'t>,
    temp: Option<Var<'t>>,
    r: &Field<'t>,
    j: &Field<'t>,
) -> (Vec<Var<'t>>, Var<'t>) {
    let e2 = k.eps * k.eps;
    let (rv, jv) = (r.at, j.at);
    let mjx = mu_dx_avg(tape, half, j);
    let constraint = rho.val() - avg(tape, half, r);
    let odd = jv.dt() * (e2 / (k.c * k.s0)) + rv.dx() * mu + jv.val() * (k.sigma / k.s0);
    let eqs = match (regime, temp) {
        (Regime::Linear, _) | (_, None) => vec![
            rv.dt() * (e2 / k.c) + jv.dx() * (e2 / k.s0 * mu) - (rho.val() - rv.val()) * k.sigma,
            odd,
            rho.dt() * (1.0 / k.c) + mjx * (1.0 / k.s0),
        ],
        (Regime::Gray, Some(t)) => vec![
            rv.dt() * (e2 / k.c) + jv.dx() * (e2 / k.s0 * mu) - (t4(t) * (0.5 * k.ac) - rv.val()) * k.sigma,
            odd,
            rho.dt() * (1.0 / k.c) + mjx * (1.0 / k.s0) + t.dt() * (0.5 * k.cv),
            t.dt() * (e2 * k.cv) - (rho.val() * 2.0 - t4(t) * k.ac) * k.sigma,
        ],
        (Regime::Steady, Some(t)) => vec![
            jv.dx() * (e2 / k.s0 * mu) - (t4(t) * k.ac - rv.val()) * k.sigma,
            rv.dx() * mu + jv.val() * (k.sigma / k.s0),
            mjx * (1.0 / k.s0) - t.dxx(),
            t.dxx() * e2 - (t4(t) * k.ac - rho.val()) * k.sigma,
        ],
    };
    (eqs, constraint)
}
