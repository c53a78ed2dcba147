//! Problem catalog for the 1D gray radiative transfer benchmarks and a few
//! closed-form helpers shared by the losses, the reference solvers and the
//! harness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Jet;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("negative temperature {0}")]
    NegativeTemperature(f64),
    #[error("negative angular integral {0}")]
    NegativeIntegral(f64),
    #[error("unknown problem id {0:?}")]
    UnknownProblem(String),
    #[error("invalid problem parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    /// Linear transport in the diffusive regime.
    P1,
    /// Steady nonlinear gray problem.
    P2,
    /// Periodic, smooth initial data.
    P3,
    /// Reflective/Planckian slab (Marshak-type).
    P4,
}

impl ProblemId {
    pub fn parse(s: &str) -> Result<Self, PhysicsError> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(Self::P1),
            "p2" => Ok(Self::P2),
            "p3" => Ok(Self::P3),
            "p4" => Ok(Self::P4),
            _ => Err(PhysicsError::UnknownProblem(s.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P1 => "p1",
            Self::P2 => "p2",
            Self::P3 => "p3",
            Self::P4 => "p4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Constant intensity on the incoming directions.
    InflowConstant { value: f64 },
    /// Prescribed material temperature.
    DirichletT { value: f64 },
    /// Intensity and temperature equal at both ends (side is ignored).
    Periodic,
    /// Specular reflection, `I(μ) = I(−μ)` on incoming directions.
    Reflective,
    /// Incoming intensity `½acT_s⁴`.
    PlanckianIncident { source_temperature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub side: Side,
    #[serde(flatten)]
    pub kind: BoundaryKind,
}

impl BoundaryCondition {
    /// Whether `mu` points into the domain from this side.
    pub fn is_incoming(&self, mu: f64) -> bool {
        match self.side {
            Side::Left => mu > 0.0,
            Side::Right => mu < 0.0,
        }
    }

    /// Whether residuals of this condition depend on an angle.
    pub fn is_angular(&self) -> bool {
        !matches!(self.kind, BoundaryKind::DirichletT { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// `I₀ = 0`, no temperature.
    Vacuum,
    /// `T₀ = (3 + sin πx)/4`, `I₀ = ½acT₀⁴`.
    SmoothSine,
    /// `T₀` constant, `I₀ = ½acT₀⁴`.
    Equilibrium { temperature: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub epsilon: f64,
    pub sigma: f64,
    pub a: f64,
    pub c: f64,
    pub cv: f64,
    pub sigma0: f64,
    pub x_left: f64,
    pub x_right: f64,
    /// `None` for the steady problem.
    pub t_end: Option<f64>,
    pub boundaries: Vec<BoundaryCondition>,
    /// `None` for the steady problem.
    pub initial: Option<InitialData>,
}

impl ProblemSpec {
    /// Catalog entry with its default Knudsen number.
    pub fn catalog(id: ProblemId) -> Self {
        let inflow = |side, value| BoundaryCondition { side, kind: BoundaryKind::InflowConstant { value } };
        match id {
            ProblemId::P1 => ProblemSpec {
                id,
                epsilon: 1e-3,
                sigma: 1.0,
                a: 1.0,
                c: 1.0,
                cv: 1.0,
                sigma0: 1.0,
                x_left: 0.0,
                x_right: 1.0,
                t_end: Some(0.1),
                boundaries: vec![inflow(Side::Left, 1.0), inflow(Side::Right, 0.0)],
                initial: Some(InitialData::Vacuum),
            },
            ProblemId::P2 => ProblemSpec {
                id,
                epsilon: 1e-3,
                sigma: 1.0,
                a: 1.0,
                c: 1.0,
                cv: 1.0,
                sigma0: 1.0,
                x_left: 0.0,
                x_right: 1.0,
                t_end: None,
                boundaries: vec![
                    inflow(Side::Left, 1.0),
                    inflow(Side::Right, 0.0),
                    BoundaryCondition { side: Side::Left, kind: BoundaryKind::DirichletT { value: 1.0 } },
                    BoundaryCondition { side: Side::Right, kind: BoundaryKind::DirichletT { value: 0.0 } },
                ],
                initial: None,
            },
            ProblemId::P3 => ProblemSpec {
                id,
                epsilon: 1.0,
                sigma: 10.0,
                a: 1.0,
                c: 1.0,
                cv: 0.1,
                sigma0: 10.0,
                x_left: 0.0,
                x_right: 2.0,
                t_end: Some(0.5),
                boundaries: vec![BoundaryCondition { side: Side::Left, kind: BoundaryKind::Periodic }],
                initial: Some(InitialData::SmoothSine),
            },
            ProblemId::P4 => ProblemSpec {
                id,
                epsilon: 1.0,
                sigma: 10.0,
                a: 0.01372,
                c: 29.98,
                cv: 1.0,
                sigma0: 10.0,
                x_left: 0.0,
                x_right: 0.25,
                t_end: Some(1.0),
                boundaries: vec![
                    BoundaryCondition { side: Side::Left, kind: BoundaryKind::Reflective },
                    BoundaryCondition {
                        side: Side::Right,
                        kind: BoundaryKind::PlanckianIncident { source_temperature: 0.1 },
                    },
                ],
                initial: Some(InitialData::Equilibrium { temperature: 1.0 }),
            },
        }
    }

    /// Catalog entry with a different Knudsen number.
    pub fn with_epsilon(id: ProblemId, epsilon: f64) -> Self {
        Self { epsilon, ..Self::catalog(id) }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.epsilon) {
            return Err(PhysicsError::InvalidParameter("epsilon"));
        }
        if !pos(self.sigma) || !pos(self.sigma0) {
            return Err(PhysicsError::InvalidParameter("opacity"));
        }
        if !pos(self.a) || !pos(self.c) || !pos(self.cv) {
            return Err(PhysicsError::InvalidParameter("material constant"));
        }
        if !(self.x_right > self.x_left) {
            return Err(PhysicsError::InvalidParameter("domain"));
        }
        if let Some(t) = self.t_end {
            if !pos(t) {
                return Err(PhysicsError::InvalidParameter("t_end"));
            }
        }
        if self.t_end.is_some() != self.initial.is_some() {
            return Err(PhysicsError::InvalidParameter("initial data"));
        }
        Ok(())
    }

    /// Whether a material temperature field is part of the problem.
    pub fn has_temperature(&self) -> bool {
        self.id != ProblemId::P1
    }

    pub fn is_stationary(&self) -> bool {
        self.t_end.is_none()
    }

    /// Number of space-time coordinates fed to the networks.
    pub fn coord_dim(&self) -> usize {
        if self.is_stationary() {
            1
        } else {
            2
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.boundaries.iter().any(|b| b.kind == BoundaryKind::Periodic)
    }

    pub fn x_at(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.x_left,
            Side::Right => self.x_right,
        }
    }

    /// `ε/√σ0`, the weight of the fluctuation in the reconstructions.
    pub fn fluctuation_scale(&self) -> f64 {
        self.epsilon / self.sigma0.sqrt()
    }

    pub fn initial_temperature(&self, x: f64) -> Option<f64> {
        match self.initial? {
            InitialData::Vacuum => None,
            InitialData::SmoothSine => Some((3.0 + (std::f64::consts::PI * x).sin()) / 4.0),
            InitialData::Equilibrium { temperature } => Some(temperature),
        }
    }

    pub fn initial_intensity(&self, x: f64, _mu: f64) -> Option<f64> {
        match self.initial? {
            InitialData::Vacuum => Some(0.0),
            _ => Some(0.5 * self.a * self.c * self.initial_temperature(x)?.powi(4)),
        }
    }
}

/// `½acT⁴`.
pub fn planck_emission(t: f64, a: f64, c: f64) -> Result<f64, PhysicsError> {
    if t < 0.0 {
        return Err(PhysicsError::NegativeTemperature(t));
    }
    Ok(0.5 * a * c * t.powi(4))
}

/// `((1/ac) ∫₋₁¹ I dμ)^{1/4}` with `intensity` sampled at the nodes of a
/// full-range rule.
pub fn radiation_temperature(intensity: &[f64], a: f64, c: f64, rule: &QuadratureRule) -> Result<f64, PhysicsError> {
    let integral: f64 = rule.weights().iter().zip(intensity).map(|(w, i)| w * i).sum();
    radiation_temperature_from_integral(integral, a, c)
}

/// Same as [`radiation_temperature`] given `∫₋₁¹ I dμ` directly.
pub fn radiation_temperature_from_integral(integral: f64, a: f64, c: f64) -> Result<f64, PhysicsError> {
    if integral < 0.0 {
        return Err(PhysicsError::NegativeIntegral(integral));
    }
    Ok((integral / (a * c)).powf(0.25))
}

/// `I(μ) = r(|μ|) + sign(μ)(ε/√σ0) j(|μ|)`.
pub fn reconstruct_intensity_eo(r: f64, j: f64, mu: f64, epsilon: f64, sigma0: f64) -> f64 {
    let s = if mu > 0.0 {
        1.0
    } else if mu < 0.0 {
        -1.0
    } else {
        0.0
    };
    r + s * epsilon / sigma0.sqrt() * j
}

/// Inverse of [`reconstruct_intensity_eo`] at `μ ≥ 0`: returns `(r, j)`.
pub fn decompose_intensity_eo(i_plus: f64, i_minus: f64, epsilon: f64, sigma0: f64) -> (f64, f64) {
    (0.5 * (i_plus + i_minus), sigma0.sqrt() / (2.0 * epsilon) * (i_plus - i_minus))
}

/// Residual of `C_v T_t + a(T⁴)_t = (ac/3σ)(T⁴)_xx`.
pub fn diffusion_limit_residual(t: Jet, cv: f64, a: f64, c: f64, sigma: f64) -> f64 {
    let t3 = t.v.powi(3);
    let t4_t = 4.0 * t3 * t.dt;
    let t4_xx = 12.0 * t.v * t.v * t.dx * t.dx + 4.0 * t3 * t.dxx;
    cv * t.dt + a * t4_t - a * c / (3.0 * sigma) * t4_xx
}
