//! Empirical risks for the PINN baseline and the micro-macro (MM) and
//! even-odd (EO) asymptotic-preserving formulations.
//!
//! Residuals are built on a [`Tape`](crate::autodiff::Tape) whose leaves are
//! network output jets from batched forward passes, so one reverse sweep
//! yields parameter gradients through every input derivative that appears
//! in the equations.

mod engine;
mod formulas;

pub use engine::{evaluate, evaluate_residuals, LossOutput};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkError, ResNet, ShapeSpec, WrapperKind};
use crate::physics::ProblemSpec;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("all residual groups are empty")]
    EmptyBundle,
    #[error("method {method:?} is missing the {role:?} network")]
    MissingNet { method: Method, role: Role },
    #[error("boundary sample refers to condition {0}, which does not exist")]
    UnknownCondition(usize),
    #[error("boundary sample with μ={mu} is not incoming at condition {condition}")]
    WrongSide { condition: usize, mu: f64 },
    #[error("initial samples given for a steady problem")]
    NoInitialData,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("autodiff failure: {0}")]
    Autodiff(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pinn,
    #[serde(alias = "apnn-mm")]
    Mm,
    #[serde(alias = "apnn-eo")]
    Eo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pinn => "pinn",
            Method::Mm => "mm",
            Method::Eo => "eo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Method::Pinn, Method::Mm, Method::Eo].into_iter().find(|m| m.name() == s)
    }
}

/// The field a network represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Full intensity (PINN).
    I,
    /// Material temperature.
    T,
    /// Angular average of the intensity.
    Rho,
    /// Mean-zero micro part (MM).
    G,
    /// Even part (EO).
    R,
    /// Odd part (EO).
    J,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::I => "i",
            Role::T => "t",
            Role::Rho => "rho",
            Role::G => "g",
            Role::R => "r",
            Role::J => "j",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Role::I, Role::T, Role::Rho, Role::G, Role::R, Role::J].into_iter().find(|r| r.name() == s)
    }

    pub fn is_angular(self) -> bool {
        matches!(self, Role::I | Role::G | Role::R | Role::J)
    }

    pub fn default_wrapper(self) -> WrapperKind {
        match self {
            Role::I | Role::T | Role::Rho => WrapperKind::Positive,
            Role::G => WrapperKind::MeanZero,
            Role::R => WrapperKind::EvenPositive,
            Role::J => WrapperKind::Odd,
        }
    }
}

/// Networks used by `method` on `spec`, in canonical order.
pub fn roles(method: Method, spec: &ProblemSpec) -> Vec<Role> {
    let mut out = match method {
        Method::Pinn => vec![Role::I],
        Method::Mm | Method::Eo => vec![Role::Rho],
    };
    if spec.has_temperature() {
        out.push(Role::T);
    }
    match method {
        Method::Pinn => {}
        Method::Mm => out.push(Role::G),
        Method::Eo => out.extend([Role::R, Role::J]),
    }
    out
}

pub fn input_dim(role: Role, spec: &ProblemSpec) -> usize {
    spec.coord_dim() + usize::from(role.is_angular())
}

/// One network and how its output is wrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldNet {
    pub role: Role,
    pub wrapper: WrapperKind,
    pub net: ResNet,
}

/// All networks of one method, ordered as [`roles`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetSet {
    pub fields: Vec<FieldNet>,
}

impl NetSet {
    /// Xavier-initialized nets; `shape_of(role)` gives `(width, blocks)`.
    /// Each net draws from its own stream derived from `seed`.
    pub fn init(
        method: Method,
        spec: &ProblemSpec,
        shape_of: impl Fn(Role) -> (usize, usize),
        seed: u64,
    ) -> Result<Self, NetworkError> {
        let fields = roles(method, spec)
            .into_iter()
            .enumerate()
            .map(|(k, role)| {
                let (width, blocks) = shape_of(role);
                let shape = ShapeSpec::new(input_dim(role, spec), width, blocks, 1);
                Ok(FieldNet {
                    role,
                    wrapper: role.default_wrapper(),
                    net: ResNet::init_xavier(shape, net_seed(seed, k))?,
                })
            })
            .collect::<Result<_, NetworkError>>()?;
        Ok(NetSet { fields })
    }

    pub fn get(&self, role: Role) -> Option<&FieldNet> {
        self.fields.iter().find(|f| f.role == role)
    }

    pub fn index_of(&self, role: Role) -> Option<usize> {
        self.fields.iter().position(|f| f.role == role)
    }

    pub fn param_count(&self) -> usize {
        self.fields.iter().map(|f| f.net.param_count()).sum()
    }

    /// Flattened parameters of all nets in order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.fields.iter().flat_map(|f| f.net.params().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, theta: &[f64]) {
        let mut off = 0;
        for f in &mut self.fields {
            let n = f.net.param_count();
            f.net.params_mut().copy_from_slice(&theta[off..off + n]);
            off += n;
        }
    }
}

/// Per-net seed: a SplitMix64 step keeps streams of neighbouring nets apart.
pub fn net_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorSample {
    /// Ignored for the steady problem.
    pub t: f64,
    pub x: f64,
    /// In `[−1, 1]`, or `[0, 1]` for EO.
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    /// Index into `ProblemSpec::boundaries`.
    pub condition: usize,
    pub t: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSample {
    pub x: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub interior: Vec<InteriorSample>,
    pub boundary: Vec<BoundarySample>,
    pub initial: Vec<InitialSample>,
}

/// Residual groups. Each group is a list of terms, each term one value per
/// sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualBundle {
    pub interior: Vec<Vec<f64>>,
    pub constraint: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
    pub initial: Vec<Vec<f64>>,
}

impl ResidualBundle {
    pub fn groups(&self) -> [&Vec<Vec<f64>>; 4] {
        [&self.interior, &self.constraint, &self.boundary, &self.initial]
    }

    pub fn is_empty(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|t| t.is_empty()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub interior: f64,
    pub constraint: f64,
    pub boundary: f64,
    pub initial: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { interior: 1.0, constraint: 1.0, boundary: 1.0, initial: 1.0 }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.interior, self.constraint, self.boundary, self.initial]
    }

    /// Weights selecting only group `g` (0 interior, 1 constraint, 2
    /// boundary, 3 initial).
    pub fn only(g: usize) -> Self {
        let mut w = [0.0; 4];
        w[g] = 1.0;
        LossWeights { interior: w[0], constraint: w[1], boundary: w[2], initial: w[3] }
    }
}

pub const GROUP_NAMES: [&str; 4] = ["interior", "constraint", "boundary", "initial"];

/// Sum over terms of the mean square; empty terms contribute nothing.
pub fn group_risk(group: &[Vec<f64>]) -> f64 {
    group
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64)
        .sum()
}

/// `Σ_g λ_g · risk_g`.
pub fn total_risk(bundle: &ResidualBundle, w: &LossWeights) -> Result<f64, LossError> {
    if bundle.is_empty() {
        return Err(LossError::EmptyBundle);
    }
    Ok(bundle.groups().iter().zip(w.as_array()).map(|(g, l)| l * group_risk(g)).sum())
}

/// Interior residuals of one sample for the PINN loss: `[transport, energy]`
/// (the energy entry is absent for linear transport).
pub fn pinn_residuals(nets: &NetSet, sample: InteriorSample, spec: &ProblemSpec) -> Result<Vec<f64>, LossError> {
    single_interior(nets, Method::Pinn, sample, spec).map(|b| b.interior)
}

/// Interior residuals of one sample for the MM loss (steady or
/// time-dependent according to `spec`).
pub fn apnn_mm_residuals(nets: &NetSet, sample: InteriorSample, spec: &ProblemSpec) -> Result<Vec<f64>, LossError> {
    single_interior(nets, Method::Mm, sample, spec).map(|b| b.interior)
}

/// Interior residuals and the constraint residual of one sample for the EO
/// loss: `(equations, ρ − ⟨r⟩)`.
pub fn apnn_eo_residuals(
    nets: &NetSet,
    sample: InteriorSample,
    spec: &ProblemSpec,
) -> Result<(Vec<f64>, f64), LossError> {
    single_interior(nets, Method::Eo, sample, spec).map(|b| (b.interior, b.constraint[0]))
}

struct SingleResult {
    interior: Vec<f64>,
    constraint: Vec<f64>,
}

fn single_interior(
    nets: &NetSet,
    method: Method,
    sample: InteriorSample,
    spec: &ProblemSpec,
) -> Result<SingleResult, LossError> {
    let samples = SampleSet { interior: vec![sample], ..Default::default() };
    let b = evaluate_residuals(nets, method, spec, &samples, crate::quadrature::DEFAULT_POINTS)?;
    Ok(SingleResult {
        interior: b.interior.iter().map(|t| t[0]).collect(),
        constraint: b.constraint.iter().map(|t| t[0]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_examples() {
        let zero = ResidualBundle { interior: vec![vec![0.0; 3]], ..Default::default() };
        assert_eq!(total_risk(&zero, &LossWeights::default()).unwrap(), 0.0);
        let one = ResidualBundle { interior: vec![vec![2.0]], ..Default::default() };
        assert_eq!(total_risk(&one, &LossWeights::default()).unwrap(), 4.0);
        assert_eq!(total_risk(&ResidualBundle::default(), &LossWeights::default()), Err(LossError::EmptyBundle));
    }

    #[test]
    fn risk_matches_brute_force() {
        let vals: Vec<f64> = (0..10).map(|i| (i as f64 * 1.7).sin()).collect();
        let b = ResidualBundle {
            interior: vec![vals.clone(), vals.iter().map(|v| 2.0 * v).collect()],
            boundary: vec![vals[..4].to_vec()],
            ..Default::default()
        };
        let mut want = 0.0;
        for v in &vals {
            want += v * v / 10.0 + 4.0 * v * v / 10.0;
        }
        let mut wb = 0.0;
        for v in &vals[..4] {
            wb += v * v;
        }
        want += 0.5 * wb / 4.0;
        let w = LossWeights { boundary: 0.5, ..Default::default() };
        assert!((total_risk(&b, &w).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn risk_grows_with_residual_size() {
        let mut b = ResidualBundle { interior: vec![vec![0.3, -0.2, 0.5]], ..Default::default() };
        let mut last = total_risk(&b, &LossWeights::default()).unwrap();
        for _ in 0..5 {
            b.interior[0][1] *= 1.5;
            let r = total_risk(&b, &LossWeights::default()).unwrap();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn role_catalog() {
        use crate::physics::ProblemId;
        let p1 = ProblemSpec::catalog(ProblemId::P1);
        let p3 = ProblemSpec::catalog(ProblemId::P3);
        assert_eq!(roles(Method::Eo, &p1), vec![Role::Rho, Role::R, Role::J]);
        assert_eq!(roles(Method::Mm, &p3), vec![Role::Rho, Role::T, Role::G]);
        assert_eq!(roles(Method::Pinn, &p3), vec![Role::I, Role::T]);
        assert_eq!(input_dim(Role::G, &p3), 3);
        assert_eq!(input_dim(Role::T, &ProblemSpec::catalog(ProblemId::P2)), 1);
        assert_ne!(net_seed(1, 0), net_seed(1, 1));
    }
}
