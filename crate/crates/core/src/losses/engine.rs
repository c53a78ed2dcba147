//! Batched evaluation of residual bundles, risks and parameter gradients.

use std::collections::HashMap;

use super::formulas::{self, Bracket, Coef, Field, Regime};
use super::{
    roles, LossError, LossWeights, Method, NetSet, ResidualBundle, Role, SampleSet,
};
use crate::autodiff::{Jet, Tape, Var};
use crate::network::{BatchTrace, Directions, WrapperKind};
use crate::physics::{BoundaryKind, ProblemSpec, Side};
use crate::quadrature::{gauss_legendre, Interval};

/// Risks, residuals and (optionally) per-net gradients of one evaluation.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub bundle: ResidualBundle,
    /// Unweighted risk of each group (interior, constraint, boundary, initial).
    pub group_risk: [f64; 4],
    pub total: f64,
    /// `∂total/∂θ` per net, in `NetSet` order; empty when not requested.
    pub grads: Vec<Vec<f64>>,
}

struct Batch {
    dirs: Directions,
    inputs: Vec<f64>,
    n: usize,
}

struct NetReq {
    wrapper: WrapperKind,
    batches: Vec<Batch>,
}

impl NetReq {
    fn batch(&mut self, dirs: Directions) -> usize {
        if let Some(i) = self.batches.iter().position(|b| b.dirs == dirs) {
            return i;
        }
        self.batches.push(Batch { dirs, inputs: Vec::new(), n: 0 });
        self.batches.len() - 1
    }

    fn push(&mut self, batch: usize, coords: &[f64], mu: Option<f64>) -> usize {
        let b = &mut self.batches[batch];
        b.inputs.extend_from_slice(coords);
        b.inputs.extend(mu);
        b.n += 1;
        b.n - 1
    }
}

#[derive(Clone, Copy)]
struct Handle {
    net: usize,
    at_batch: usize,
    at_start: usize,
    nodes: Option<(usize, usize)>,
    want_nodes: bool,
}

/// Intensity reconstruction at one boundary/initial point.
#[derive(Clone, Copy)]
enum Recon {
    Direct(Handle),
    MicroMacro { rho: Handle, g: Handle },
    EvenOdd { r: Handle, j: Handle, sign: f64 },
}

enum BoundaryPlan {
    Target { recon: Recon, target: f64, slot: usize },
    Mirror { plus: Recon, minus: Recon, slot: usize },
    Periodic { left: Recon, right: Recon, temps: Option<(Handle, Handle)>, slot: usize },
    Dirichlet { temp: Handle, value: f64, slot: usize },
}

struct Planner<'a> {
    spec: &'a ProblemSpec,
    method: Method,
    nets: Vec<NetReq>,
    index: Vec<(Role, usize)>,
    full: Bracket,
    half: Bracket,
    /// Node evaluations already requested, keyed by net, coordinates and
    /// channels, so samples sharing `(t, x)` share them.
    node_cache: HashMap<(usize, Vec<u64>, Directions), (usize, usize)>,
}

impl<'a> Planner<'a> {
    fn net(&self, role: Role) -> usize {
        self.index.iter().find(|(r, _)| *r == role).map(|&(_, i)| i).expect("role checked")
    }

    fn interior_dirs(&self, role: Role) -> Directions {
        if self.spec.is_stationary() {
            Directions { t: None, x: Some(0), xx: role == Role::T }
        } else {
            Directions { t: Some(0), x: Some(1), xx: false }
        }
    }

    fn node_bracket(&self, wrapper: WrapperKind) -> &Bracket {
        match wrapper {
            WrapperKind::EvenPositive | WrapperKind::Odd => &self.half,
            _ => &self.full,
        }
    }

    fn request(&mut self, net: usize, coords: &[f64], mu: Option<f64>, dirs: Directions, want_nodes: bool) -> Handle {
        let wrapper = self.nets[net].wrapper;
        let parity = matches!(wrapper, WrapperKind::EvenPositive | WrapperKind::Odd);
        let at_batch = self.nets[net].batch(dirs);
        let at_start = self.nets[net].push(at_batch, coords, mu);
        if parity {
            self.nets[net].push(at_batch, coords, mu.map(|m| -m));
        }
        let mut nodes = None;
        if want_nodes || wrapper == WrapperKind::MeanZero {
            let node_dirs = if wrapper == WrapperKind::MeanZero {
                dirs
            } else {
                Directions { t: None, x: dirs.x, xx: false }
            };
            let b = self.nets[net].batch(node_dirs);
            let key = (net, coords.iter().map(|c| c.to_bits()).collect(), node_dirs);
            if let Some(&hit) = self.node_cache.get(&key) {
                return Handle { net, at_batch, at_start, nodes: Some(hit), want_nodes };
            }
            let angles: Vec<f64> = if parity {
                let h = &self.half.nodes;
                h.iter().copied().chain(h.iter().map(|m| -m)).collect()
            } else {
                self.full.nodes.clone()
            };
            let start = self.nets[net].batches[b].n;
            for m in angles {
                self.nets[net].push(b, coords, Some(m));
            }
            nodes = Some((b, start));
            self.node_cache.insert(key, (b, start));
        }
        Handle { net, at_batch, at_start, nodes, want_nodes }
    }

    fn request_recon(&mut self, coords: &[f64], mu: f64) -> Recon {
        let vd = Directions::VALUE;
        match self.method {
            Method::Pinn => Recon::Direct(self.request(self.net(Role::I), coords, Some(mu), vd, false)),
            Method::Mm => Recon::MicroMacro {
                rho: self.request(self.net(Role::Rho), coords, None, vd, false),
                g: self.request(self.net(Role::G), coords, Some(mu), vd, false),
            },
            Method::Eo => {
                let sign = if mu > 0.0 {
                    1.0
                } else if mu < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Recon::EvenOdd {
                    r: self.request(self.net(Role::R), coords, Some(mu.abs()), vd, false),
                    j: self.request(self.net(Role::J), coords, Some(mu.abs()), vd, false),
                    sign,
                }
            }
        }
    }

    fn request_temp(&mut self, coords: &[f64]) -> Handle {
        self.request(self.net(Role::T), coords, None, Directions::VALUE, false)
    }

    fn coords(&self, t: f64, x: f64) -> Vec<f64> {
        if self.spec.is_stationary() {
            vec![x]
        } else {
            vec![t, x]
        }
    }
}

struct Leaves<'t> {
    vars: Vec<Vec<Vec<Var<'t>>>>,
}

fn field<'t>(p: &Planner<'_>, leaves: &Leaves<'t>, h: Handle) -> Field<'t> {
    let tape_vars = &leaves.vars[h.net];
    let wrapper = p.nets[h.net].wrapper;
    let at = |i: usize| tape_vars[h.at_batch][h.at_start + i];
    let node_raw: Vec<Var<'t>> = match h.nodes {
        Some((b, s)) => {
            let count = match wrapper {
                WrapperKind::EvenPositive | WrapperKind::Odd => 2 * p.half.nodes.len(),
                _ => p.full.nodes.len(),
            };
            tape_vars[b][s..s + count].to_vec()
        }
        None => Vec::new(),
    };
    let bracket = p.node_bracket(wrapper);
    let (at_v, nodes) = match wrapper {
        WrapperKind::Plain => (at(0), node_raw),
        WrapperKind::Positive => (at(0).softplus(), node_raw.into_iter().map(|v| v.softplus()).collect()),
        WrapperKind::MeanZero => {
            let tape = at(0).tape();
            let mean = tape.sum(bracket.weights.iter().zip(&node_raw).map(|(&w, &v)| v * w));
            let nodes = if h.want_nodes { node_raw.iter().map(|&v| v - mean).collect() } else { Vec::new() };
            (at(0) - mean, nodes)
        }
        WrapperKind::EvenPositive => {
            let n = node_raw.len() / 2;
            let nodes = (0..n).map(|k| (node_raw[k] + node_raw[n + k]).softplus()).collect();
            ((at(0) + at(1)).softplus(), nodes)
        }
        WrapperKind::Odd => {
            let n = node_raw.len() / 2;
            let nodes = (0..n).map(|k| node_raw[k] - node_raw[n + k]).collect();
            (at(0) - at(1), nodes)
        }
    };
    Field { at: at_v, nodes }
}

fn recon_value<'t>(p: &Planner<'_>, leaves: &Leaves<'t>, r: Recon) -> Var<'t> {
    let scale = p.spec.fluctuation_scale();
    match r {
        Recon::Direct(h) => field(p, leaves, h).at,
        Recon::MicroMacro { rho, g } => field(p, leaves, rho).at + field(p, leaves, g).at * scale,
        Recon::EvenOdd { r, j, sign } => field(p, leaves, r).at + field(p, leaves, j).at * (sign * scale),
    }
}

fn bracket_of(n: usize, interval: Interval) -> Result<Bracket, LossError> {
    let rule = gauss_legendre(n, interval).map_err(|e| LossError::Autodiff(e.to_string()))?;
    Ok(Bracket { nodes: rule.nodes().to_vec(), weights: rule.bracket_weights() })
}

/// Residuals only, without gradients.
pub fn evaluate_residuals(
    nets: &NetSet,
    method: Method,
    spec: &ProblemSpec,
    samples: &SampleSet,
    quad_points: usize,
) -> Result<ResidualBundle, LossError> {
    let w = LossWeights::default();
    run(nets, method, spec, samples, &w, quad_points, false).map(|o| o.bundle)
}

/// Residuals, risks and, if `with_grad`, parameter gradients of the
/// weighted total risk.
pub fn evaluate(
    nets: &NetSet,
    method: Method,
    spec: &ProblemSpec,
    samples: &SampleSet,
    weights: &LossWeights,
    quad_points: usize,
    with_grad: bool,
) -> Result<LossOutput, LossError> {
    run(nets, method, spec, samples, weights, quad_points, with_grad)
}

fn run(
    nets: &NetSet,
    method: Method,
    spec: &ProblemSpec,
    samples: &SampleSet,
    weights: &LossWeights,
    quad_points: usize,
    with_grad: bool,
) -> Result<LossOutput, LossError> {
    let mut index = Vec::new();
    for role in roles(method, spec) {
        let i = nets.index_of(role).ok_or(LossError::MissingNet { method, role })?;
        index.push((role, i));
    }
    if spec.is_stationary() && !samples.initial.is_empty() {
        return Err(LossError::NoInitialData);
    }
    let mut p = Planner {
        spec,
        method,
        nets: nets.fields.iter().map(|f| NetReq { wrapper: f.wrapper, batches: Vec::new() }).collect(),
        index,
        full: bracket_of(quad_points, Interval::Full)?,
        half: bracket_of(quad_points, Interval::Half)?,
        node_cache: HashMap::new(),
    };
    let role_list: Vec<Role> = p.index.iter().map(|&(r, _)| r).collect();

    // Interior: every role at the sample, angular roles also at the nodes.
    let mut interior_plans = Vec::with_capacity(samples.interior.len());
    for s in &samples.interior {
        let coords = p.coords(s.t, s.x);
        let handles: Vec<Handle> = role_list
            .iter()
            .map(|&role| {
                let mu = role.is_angular().then_some(s.mu);
                let dirs = p.interior_dirs(role);
                p.request(p.net(role), &coords, mu, dirs, role.is_angular())
            })
            .collect();
        interior_plans.push(handles);
    }

    // Boundary: one slot (term) per condition, two for periodic with T.
    let mut slot_base = Vec::with_capacity(spec.boundaries.len());
    let mut n_slots = 0;
    for bc in &spec.boundaries {
        slot_base.push(n_slots);
        n_slots += 1 + usize::from(bc.kind == BoundaryKind::Periodic && spec.has_temperature());
    }
    let mut boundary_plans = Vec::with_capacity(samples.boundary.len());
    for s in &samples.boundary {
        let bc = *spec.boundaries.get(s.condition).ok_or(LossError::UnknownCondition(s.condition))?;
        let slot = slot_base[s.condition];
        let xb = spec.x_at(bc.side);
        let coords = p.coords(s.t, xb);
        let wrong = LossError::WrongSide { condition: s.condition, mu: s.mu };
        let plan = match bc.kind {
            BoundaryKind::InflowConstant { value } => {
                if !bc.is_incoming(s.mu) {
                    return Err(wrong);
                }
                BoundaryPlan::Target { recon: p.request_recon(&coords, s.mu), target: value, slot }
            }
            BoundaryKind::PlanckianIncident { source_temperature } => {
                if !bc.is_incoming(s.mu) {
                    return Err(wrong);
                }
                let target = 0.5 * spec.a * spec.c * source_temperature.powi(4);
                BoundaryPlan::Target { recon: p.request_recon(&coords, s.mu), target, slot }
            }
            BoundaryKind::Reflective => {
                if !bc.is_incoming(s.mu) {
                    return Err(wrong);
                }
                BoundaryPlan::Mirror {
                    plus: p.request_recon(&coords, s.mu),
                    minus: p.request_recon(&coords, -s.mu),
                    slot,
                }
            }
            BoundaryKind::Periodic => {
                let cl = p.coords(s.t, spec.x_at(Side::Left));
                let cr = p.coords(s.t, spec.x_at(Side::Right));
                let left = p.request_recon(&cl, s.mu);
                let right = p.request_recon(&cr, s.mu);
                let temps = spec.has_temperature().then(|| (p.request_temp(&cl), p.request_temp(&cr)));
                BoundaryPlan::Periodic { left, right, temps, slot }
            }
            BoundaryKind::DirichletT { value } => {
                if !spec.has_temperature() {
                    return Err(LossError::MissingNet { method, role: Role::T });
                }
                BoundaryPlan::Dirichlet { temp: p.request_temp(&coords), value, slot }
            }
        };
        boundary_plans.push(plan);
    }

    let mut initial_plans = Vec::with_capacity(samples.initial.len());
    for s in &samples.initial {
        let coords = p.coords(0.0, s.x);
        let temp = spec.has_temperature().then(|| p.request_temp(&coords));
        initial_plans.push((temp, p.request_recon(&coords, s.mu), *s));
    }

    // Batched forward passes.
    let mut traces: Vec<Vec<BatchTrace>> = Vec::with_capacity(p.nets.len());
    for (req, f) in p.nets.iter().zip(&nets.fields) {
        let mut per = Vec::with_capacity(req.batches.len());
        for b in &req.batches {
            per.push(f.net.forward_batch(&b.inputs, b.dirs)?);
        }
        traces.push(per);
    }

    let tape = Tape::with_capacity(1 << 16);
    let leaves = Leaves {
        vars: traces
            .iter()
            .map(|per| per.iter().map(|tr| tr.outputs().iter().map(|&j| tape.leaf(j)).collect()).collect())
            .collect(),
    };

    let coef = Coef::of(spec);
    let regime = Regime::of(spec);
    let mut interior_terms: Vec<Vec<Var>> = Vec::new();
    let mut constraint_terms: Vec<Vec<Var>> = Vec::new();
    for (s, handles) in samples.interior.iter().zip(&interior_plans) {
        let fields: Vec<Field> = handles.iter().map(|&h| field(&p, &leaves, h)).collect();
        let get = |role: Role| role_list.iter().position(|&r| r == role).map(|k| fields[k].clone());
        let temp = get(Role::T).map(|f| f.at);
        let (eqs, constraint) = match method {
            Method::Pinn => {
                (formulas::pinn(&tape, coef, regime, s.mu, &p.full, &get(Role::I).expect("I"), temp), None)
            }
            Method::Mm => (
                formulas::mm(&tape, coef, regime, s.mu, &p.full, get(Role::Rho).expect("rho").at, temp, &get(Role::G).expect("g")),
                None,
            ),
            Method::Eo => {
                let (e, c) = formulas::eo(
                    &tape,
                    coef,
                    regime,
                    s.mu,
                    &p.half,
                    get(Role::Rho).expect("rho").at,
                    temp,
                    &get(Role::R).expect("r"),
                    &get(Role::J).expect("j"),
                );
                (e, Some(c))
            }
        };
        if interior_terms.is_empty() {
            interior_terms = vec![Vec::with_capacity(samples.interior.len()); eqs.len()];
        }
        for (term, e) in interior_terms.iter_mut().zip(eqs) {
            term.push(e);
        }
        if let Some(c) = constraint {
            if constraint_terms.is_empty() {
                constraint_terms.push(Vec::with_capacity(samples.interior.len()));
            }
            constraint_terms[0].push(c);
        }
    }

    let mut boundary_terms: Vec<Vec<Var>> = vec![Vec::new(); n_slots];
    for plan in &boundary_plans {
        match *plan {
            BoundaryPlan::Target { recon, target, slot } => {
                boundary_terms[slot].push(recon_value(&p, &leaves, recon) - target);
            }
            BoundaryPlan::Mirror { plus, minus, slot } => {
                boundary_terms[slot].push(recon_value(&p, &leaves, plus) - recon_value(&p, &leaves, minus));
            }
            BoundaryPlan::Periodic { left, right, temps, slot } => {
                boundary_terms[slot].push(recon_value(&p, &leaves, left) - recon_value(&p, &leaves, right));
                if let Some((tl, tr)) = temps {
                    boundary_terms[slot + 1].push(field(&p, &leaves, tl).at - field(&p, &leaves, tr).at);
                }
            }
            BoundaryPlan::Dirichlet { temp, value, slot } => {
                boundary_terms[slot].push(field(&p, &leaves, temp).at - value);
            }
        }
    }

    let mut initial_terms: Vec<Vec<Var>> = Vec::new();
    if !initial_plans.is_empty() {
        let with_t = spec.has_temperature();
        initial_terms = vec![Vec::new(); 1 + usize::from(with_t)];
        for (temp, recon, s) in &initial_plans {
            let i0 = spec.initial_intensity(s.x, s.mu).unwrap_or(0.0);
            let mut k = 0;
            if let Some(th) = temp {
                let t0 = spec.initial_temperature(s.x).unwrap_or(0.0);
                initial_terms[0].push(field(&p, &leaves, *th).at - t0);
                k = 1;
            }
            initial_terms[k].push(recon_value(&p, &leaves, *recon) - i0);
        }
    }

    let groups = [&interior_terms, &constraint_terms, &boundary_terms, &initial_terms];
    let bundle = ResidualBundle {
        interior: values(&interior_terms),
        constraint: values(&constraint_terms),
        boundary: values(&boundary_terms),
        initial: values(&initial_terms),
    };
    if bundle.is_empty() {
        return Err(LossError::EmptyBundle);
    }
    let mut group_risk_vals = [0.0; 4];
    let mut total = tape.constant(0.0);
    for (g, (terms, lambda)) in groups.iter().zip(weights.as_array()).enumerate() {
        let mut risk = tape.constant(0.0);
        for term in terms.iter().filter(|t| !t.is_empty()) {
            let sq = tape.sum(term.iter().map(|v| v.square()));
            risk = risk + sq * (1.0 / term.len() as f64);
        }
        group_risk_vals[g] = risk.value();
        if lambda != 0.0 {
            total = total + risk * lambda;
        }
    }

    let mut grads = Vec::new();
    if with_grad {
        let adj = tape.backward(total).map_err(|e| LossError::Autodiff(e.to_string()))?;
        for ((f, per), leaf_sets) in nets.fields.iter().zip(&traces).zip(&leaves.vars) {
            let mut g = vec![0.0; f.net.param_count()];
            for (tr, lv) in per.iter().zip(leaf_sets) {
                let out_adj: Vec<Jet> = lv.iter().map(|&v| adj.of(v)).collect();
                f.net.backward_batch(tr, &out_adj, &mut g)?;
            }
            grads.push(g);
        }
    }
    Ok(LossOutput { bundle, group_risk: group_risk_vals, total: total.value(), grads })
}

fn values(terms: &[Vec<Var>]) -> Vec<Vec<f64>> {
    terms.iter().map(|t| t.iter().map(|v| v.value()).collect()).collect()
}
