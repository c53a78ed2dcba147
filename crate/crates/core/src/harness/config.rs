//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::losses::{roles, Method, NetSet, Role};
use crate::network::WrapperKind;
use crate::physics::{ProblemId, ProblemSpec};
use crate::quadrature::MAX_POINTS;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleShape {
    pub width: usize,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub width: usize,
    pub blocks: usize,
    /// Per-role shapes replacing the default.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<Role, RoleShape>,
    /// Per-role output wrappers replacing the default (`plain` or
    /// `positive`, for `rho`, `t` and `i` only).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub wrappers: BTreeMap<Role, WrapperKind>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { width: 128, blocks: 2, overrides: BTreeMap::new(), wrappers: BTreeMap::new() }
    }
}

impl NetworkConfig {
    pub fn shape_of(&self, role: Role) -> (usize, usize) {
        self.overrides.get(&role).map_or((self.width, self.blocks), |s| (s.width, s.blocks))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub method: Method,
    /// Overrides the catalog Knudsen number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn spec(&self) -> ProblemSpec {
        match self.epsilon {
            Some(e) => ProblemSpec::with_epsilon(self.problem, e),
            None => ProblemSpec::catalog(self.problem),
        }
    }

    pub fn init_nets(&self) -> Result<NetSet, HarnessError> {
        let mut nets = NetSet::init(self.method, &self.spec(), |r| self.network.shape_of(r), self.train.seed)?;
        for f in &mut nets.fields {
            if let Some(&w) = self.network.wrappers.get(&f.role) {
                f.wrapper = w;
            }
        }
        Ok(nets)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let spec = self.spec();
        spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let net_roles = roles(self.method, &spec);
        for role in net_roles.iter().copied() {
            let (w, b) = self.network.shape_of(role);
            if w == 0 || b == 0 {
                return bad(format!("network for {} needs positive width and blocks", role.name()));
            }
        }
        if let Some(r) = self.network.overrides.keys().find(|r| !net_roles.contains(r)) {
            return bad(format!("{} is not a network of {}", r.name(), self.method.name()));
        }
        if let Some(r) = self.network.wrappers.keys().find(|r| !net_roles.contains(r)) {
            return bad(format!("{} is not a network of {}", r.name(), self.method.name()));
        }
        for (role, kind) in &self.network.wrappers {
            let scalar = matches!(role, Role::Rho | Role::T | Role::I);
            if !scalar || !matches!(kind, WrapperKind::Plain | WrapperKind::Positive) {
                return bad(format!("wrapper {} is not allowed for {}", kind.name(), role.name()));
            }
        }
        let t = &self.train;
        if t.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if t.quad_points == 0 || t.quad_points > MAX_POINTS {
            return bad(format!("quad_points must be in 1..={MAX_POINTS}"));
        }
        let s = &t.schedule;
        if !(s.eta0 > 0.0 && s.eta0.is_finite()) || !(s.gamma > 0.0 && s.gamma <= 1.0) || s.period == 0 {
            return bad("learning-rate schedule needs eta0 > 0, 0 < gamma <= 1, period > 0".into());
        }
        if t.weights.as_array().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("loss weights must be finite and non-negative".into());
        }
        let sm = &t.sampler;
        if sm.n_interior == 0 || sm.angles_per_point == 0 {
            return bad("n_interior and angles_per_point must be positive".into());
        }
        if sm.n_boundary < spec.boundaries.len() {
            return bad("n_boundary must cover every boundary condition".into());
        }
        match (spec.is_stationary(), sm.n_initial) {
            (true, n) if n > 0 => return bad("steady problems take no initial samples (set n_initial to 0)".into()),
            (false, 0) => return bad("time-dependent problems need initial samples".into()),
            _ => {}
        }
        Ok(())
    }
}
