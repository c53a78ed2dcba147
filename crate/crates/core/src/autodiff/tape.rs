//! Reverse-mode tape over [`Jet`]-valued nodes.
//!
//! Every node stores a full jet (value, `∂t`, `∂x`, `∂²x`), so one reverse
//! sweep yields parameter gradients of expressions that themselves contain
//! input derivatives of the recorded fields.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::dual::{Channel, Jet};
use super::unary::Unary;
use super::AdError;

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Param(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Unary(usize, Unary),
    Component(usize, Channel),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    value: Jet,
}

/// Append-only record of jet operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

/// Per-parameter partial derivatives, indexed by parameter slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradVector(pub Vec<f64>);

impl GradVector {
    pub fn zeros(n: usize) -> Self {
        GradVector(vec![0.0; n])
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Adjoints {
    node_adjoints: Vec<Jet>,
    params: GradVector,
}

impl Adjoints {
    /// Adjoint of every jet channel of a leaf (or any node).
    pub fn of(&self, v: Var<'_>) -> Jet {
        self.node_adjoints[v.idx]
    }

    pub fn param(&self, slot: usize) -> f64 {
        self.params.0.get(slot).copied().unwrap_or(0.0)
    }

    pub fn params(&self) -> &GradVector {
        &self.params
    }

    pub fn into_params(self) -> GradVector {
        self.params
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape { nodes: RefCell::new(Vec::with_capacity(n)) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: Jet) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value });
        Var { tape: self, idx: nodes.len() - 1 }
    }

    /// An external input jet whose adjoint is read back after the sweep.
    pub fn leaf(&self, value: Jet) -> Var<'_> {
        self.push(Op::Leaf, value)
    }

    pub fn constant(&self, v: f64) -> Var<'_> {
        self.push(Op::Leaf, Jet::constant(v))
    }

    /// A trainable scalar occupying gradient slot `slot`.
    pub fn param(&self, slot: usize, value: f64) -> Var<'_> {
        self.push(Op::Param(slot), Jet::constant(value))
    }

    pub fn sum<'t, I: IntoIterator<Item = Var<'t>>>(&'t self, terms: I) -> Var<'t> {
        terms.into_iter().fold(self.constant(0.0), |acc, v| acc + v)
    }

    fn owns(&self, v: Var<'_>) -> bool {
        std::ptr::eq(self, v.tape)
    }

    /// Reverse sweep seeded with `∂output/∂output.value = 1`.
    pub fn backward(&self, output: Var<'_>) -> Result<Adjoints, AdError> {
        if !self.owns(output) || output.idx >= self.len() {
            return Err(AdError::ForeignNode);
        }
        let nodes = self.nodes.borrow();
        let mut adj = vec![Jet::ZERO; output.idx + 1];
        adj[output.idx].v = 1.0;
        let mut n_params = 0;
        for node in nodes.iter() {
            if let Op::Param(slot) = node.op {
                n_params = n_params.max(slot + 1);
            }
        }
        let mut params = GradVector::zeros(n_params);
        for i in (0..=output.idx).rev() {
            let o = adj[i];
            if o == Jet::ZERO {
                continue;
            }
            match nodes[i].op {
                Op::Leaf => {}
                Op::Param(slot) => params.0[slot] += o.v,
                Op::Add(a, b) => {
                    adj[a] += o;
                    adj[b] += o;
                }
                Op::Sub(a, b) => {
                    adj[a] += o;
                    adj[b] += -o;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (nodes[a].value, nodes[b].value);
                    adj[a] += mul_adjoint(o, vb);
                    adj[b] += mul_adjoint(o, va);
                }
                Op::Unary(a, f) => {
                    let x = nodes[a].value;
                    let d = f.derivs(x.v);
                    let g = &mut adj[a];
                    g.v += o.v * d.f1
                        + o.dt * d.f2 * x.dt
                        + o.dx * d.f2 * x.dx
                        + o.dxx * (d.f3 * x.dx * x.dx + d.f2 * x.dxx);
                    g.dt += o.dt * d.f1;
                    g.dx += o.dx * d.f1 + o.dxx * 2.0 * d.f2 * x.dx;
                    g.dxx += o.dxx * d.f1;
                }
                Op::Component(a, ch) => {
                    *adj[a].get_mut(ch) += o.v;
                }
            }
        }
        Ok(Adjoints { node_adjoints: adj, params })
    }
}

/// Adjoint contribution to `a` from `c = a * b`, given `c`'s adjoint `o`.
#[inline]
fn mul_adjoint(o: Jet, b: Jet) -> Jet {
    Jet {
        v: o.v * b.v + o.dt * b.dt + o.dx * b.dx + o.dxx * b.dxx,
        dt: o.dt * b.v,
        dx: o.dx * b.v + 2.0 * o.dxx * b.dx,
        dxx: o.dxx * b.v,
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn jet(&self) -> Jet {
        self.tape.nodes.borrow()[self.idx].value
    }

    pub fn value(&self) -> f64 {
        self.jet().v
    }

    pub fn apply(self, f: Unary) -> Var<'t> {
        let x = self.jet();
        let d = f.derivs(x.v);
        let value = Jet {
            v: d.f0,
            dt: d.f1 * x.dt,
            dx: d.f1 * x.dx,
            dxx: d.f2 * x.dx * x.dx + d.f1 * x.dxx,
        };
        self.tape.push(Op::Unary(self.idx, f), value)
    }

    /// Lifts one jet channel to a new scalar node (its derivatives are
    /// dropped: mixed partials are never formed).
    pub fn component(self, ch: Channel) -> Var<'t> {
        let v = self.jet().get(ch);
        self.tape.push(Op::Component(self.idx, ch), Jet::constant(v))
    }

    pub fn val(self) -> Var<'t> {
        self.component(Channel::Value)
    }
    pub fn dt(self) -> Var<'t> {
        self.component(Channel::Dt)
    }
    pub fn dx(self) -> Var<'t> {
        self.component(Channel::Dx)
    }
    pub fn dxx(self) -> Var<'t> {
        self.component(Channel::Dxx)
    }

    pub fn exp(self) -> Var<'t> {
        self.apply(Unary::Exp)
    }
    pub fn ln(self) -> Var<'t> {
        self.apply(Unary::Ln)
    }
    pub fn sin(self) -> Var<'t> {
        self.apply(Unary::Sin)
    }
    pub fn cos(self) -> Var<'t> {
        self.apply(Unary::Cos)
    }
    pub fn tanh(self) -> Var<'t> {
        self.apply(Unary::Tanh)
    }
    pub fn gelu(self) -> Var<'t> {
        self.apply(Unary::Gelu)
    }
    pub fn softplus(self) -> Var<'t> {
        self.apply(Unary::Softplus)
    }
    pub fn relu(self) -> Var<'t> {
        self.apply(Unary::Relu)
    }
    pub fn powi(self, n: i32) -> Var<'t> {
        self.apply(Unary::Powi(n))
    }
    pub fn powf(self, a: f64) -> Var<'t> {
        self.apply(Unary::Powf(a))
    }
    pub fn sqrt(self) -> Var<'t> {
        self.apply(Unary::Sqrt)
    }
    pub fn recip(self) -> Var<'t> {
        self.apply(Unary::Recip)
    }
    pub fn square(self) -> Var<'t> {
        self * self
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, o.tape));
        let v = self.jet() + o.jet();
        self.tape.push(Op::Add(self.idx, o.idx), v)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, o.tape));
        let v = self.jet() - o.jet();
        self.tape.push(Op::Sub(self.idx, o.idx), v)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, o.tape));
        let v = self.jet() * o.jet();
        self.tape.push(Op::Mul(self.idx, o.idx), v)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        self * o.recip()
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.apply(Unary::Neg)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, k: f64) -> Var<'t> {
        self.apply(Unary::Shift(k))
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, k: f64) -> Var<'t> {
        self.apply(Unary::Shift(-k))
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, k: f64) -> Var<'t> {
        self.apply(Unary::Scale(k))
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, k: f64) -> Var<'t> {
        self.apply(Unary::Scale(1.0 / k))
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, v: Var<'t>) -> Var<'t> {
        v + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        (-v) + self
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_gradient() {
        let tape = Tape::new();
        let a = tape.param(0, 2.0);
        let b = tape.param(1, 5.0);
        let g = tape.backward(a * b).unwrap();
        assert_eq!(g.params().0, vec![5.0, 2.0]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let tape = Tape::new();
        let theta = [1.0, -1.0, 0.5];
        let vars: Vec<_> = theta.iter().enumerate().map(|(i, &t)| tape.param(i, t)).collect();
        let out = tape.sum(vars.iter().map(|&v| v * v));
        let g = tape.backward(out).unwrap();
        assert_eq!(g.params().0, vec![2.0, -2.0, 1.0]);
    }

    #[test]
    fn foreign_output_is_rejected() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let _ = t1.constant(1.0);
        let v = t2.constant(2.0);
        assert!(matches!(t1.backward(v), Err(AdError::ForeignNode)));
    }

    #[test]
    fn leaf_adjoint_of_derivative_expression() {
        // out = (u.dx)^2 + u.v * u.dxx ; d out / d(u.dx) = 2 u.dx, d/d(u.v) = u.dxx
        let tape = Tape::new();
        let u = tape.leaf(Jet::new(1.5, 0.2, -0.7, 3.0));
        let out = u.dx().square() + u.val() * u.dxx();
        let adj = tape.backward(out).unwrap().of(u);
        assert_eq!(adj, Jet::new(3.0, 0.0, -1.4, 1.5));
    }

    #[test]
    fn nested_unary_adjoint_matches_finite_difference() {
        // f(u) = (tanh(u))_xx evaluated through jets; d/d(u.v) checked by FD
        let build = |v: f64| {
            let tape = Tape::new();
            let u = tape.leaf(Jet::new(v, 0.0, 0.8, -0.3));
            let y = (u.tanh() * u.exp()).dxx();
            let val = y.value();
            let adj = tape.backward(y).unwrap().of(u);
            (val, adj)
        };
        let (_, adj) = build(0.4);
        let h = 1e-6;
        let fd = (build(0.4 + h).0 - build(0.4 - h).0) / (2.0 * h);
        assert!((adj.v - fd).abs() < 1e-8, "{} vs {}", adj.v, fd);
    }
}
