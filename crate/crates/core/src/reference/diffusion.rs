//! Implicit solver for the equilibrium diffusion limit.
//!
//! Gray problems: `C_v T_t + a(T⁴)_t = (ac/3σ)(T⁴)_xx`.
//! Linear problem: `ρ_t = (c/3σ) ρ_xx`.

use serde::{Deserialize, Serialize};

use super::grid::{GridSolution, SolverMeta};
use super::linalg::BlockTridiag;
use super::ReferenceError;
use crate::physics::{BoundaryKind, ProblemSpec, Side};
use crate::quadrature::{gauss_legendre, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionConfig {
    pub n_x: usize,
    pub n_t: usize,
    pub tol: f64,
    pub max_newton: usize,
    pub save_every: usize,
    /// Half-range nodes used only to lay out the isotropic intensity.
    pub n_mu: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig { n_x: 400, n_t: 2000, tol: 1e-12, max_newton: 50, save_every: 20, n_mu: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Edge {
    /// Value of the diffused variable on the boundary.
    Dirichlet(f64),
    Neumann,
    Periodic,
}

/// Solves the diffusion limit of a time-dependent problem.
pub fn solve_diffusion_limit(spec: &ProblemSpec, cfg: &DiffusionConfig) -> Result<GridSolution, ReferenceError> {
    spec.validate().map_err(|e| ReferenceError::Config(e.to_string()))?;
    let t_end = spec.t_end.ok_or(ReferenceError::Unsupported { problem: spec.id, reason: "steady problem" })?;
    if cfg.n_x < 3 || cfg.n_t == 0 || cfg.save_every == 0 || cfg.max_newton == 0 || !(cfg.tol > 0.0) {
        return Err(ReferenceError::Config("diffusion grid parameters must be positive".into()));
    }
    let gray = spec.has_temperature();
    let ac = spec.a * spec.c;
    // Diffused variable: T⁴ (gray) or ρ (linear).
    let edge = |side: Side| -> Result<Edge, ReferenceError> {
        if spec.is_periodic() {
            return Ok(Edge::Periodic);
        }
        for bc in spec.boundaries.iter().filter(|b| b.side == side) {
            match bc.kind {
                BoundaryKind::Reflective => return Ok(Edge::Neumann),
                BoundaryKind::InflowConstant { value } => {
                    return Ok(Edge::Dirichlet(if gray { 2.0 * value / ac } else { value }))
                }
                BoundaryKind::PlanckianIncident { source_temperature } => {
                    return Ok(Edge::Dirichlet(if gray {
                        source_temperature.powi(4)
                    } else {
                        0.5 * ac * source_temperature.powi(4)
                    }))
                }
                _ => {}
            }
        }
        Err(ReferenceError::Unsupported { problem: spec.id, reason: "missing boundary condition" })
    };
    let (left, right) = (edge(Side::Left)?, edge(Side::Right)?);
    let periodic = left == Edge::Periodic;
    let n = cfg.n_x;
    let dx = (spec.x_right - spec.x_left) / n as f64;
    let x: Vec<f64> = (0..n).map(|i| spec.x_left + (i as f64 + 0.5) * dx).collect();
    let dt = t_end / cfg.n_t as f64;
    let k = if gray { ac / (3.0 * spec.sigma) } else { spec.c / (3.0 * spec.sigma) };
    let kd = k / (dx * dx);
    // storage(u), storage'(u), flux variable E(u), E'(u)
    let storage = |u: f64| if gray { spec.cv * u + spec.a * u.powi(4) } else { u };
    let dstorage = |u: f64| if gray { spec.cv + 4.0 * spec.a * u.powi(3) } else { 1.0 };
    let e = |u: f64| if gray { u.powi(4) } else { u };
    let de = |u: f64| if gray { 4.0 * u.powi(3) } else { 1.0 };

    let mut u: Vec<f64> = x
        .iter()
        .map(|&xi| {
            if gray {
                spec.initial_temperature(xi).unwrap_or(0.0)
            } else {
                spec.initial_intensity(xi, 0.0).unwrap_or(0.0)
            }
        })
        .collect();
    let mut times = vec![0.0];
    let mut snaps = vec![u.clone()];
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for step in 1..=cfg.n_t {
        let old: Vec<f64> = u.iter().map(|&v| storage(v)).collect();
        let mut converged = false;
        for _ in 0..cfg.max_newton {
            let mut f = vec![0.0; n];
            let mut m = BlockTridiag::zeros(n, 1);
            for i in 0..n {
                let ui = u[i];
                let mut lap = -2.0 * e(ui);
                let mut diag = dstorage(ui) / dt + 2.0 * kd * de(ui);
                for (nb, ed, is_left) in [(i.checked_sub(1), left, true), ((i + 1 < n).then_some(i + 1), right, false)] {
                    let nb = nb.or_else(|| periodic.then(|| if is_left { n - 1 } else { 0 }));
                    match (nb, ed) {
                        (Some(j), _) => {
                            lap += e(u[j]);
                            if is_left {
                                m.add_lower(i, 0, 0, -kd * de(u[j]));
                            } else {
                                m.add_upper(i, 0, 0, -kd * de(u[j]));
                            }
                        }
                        (None, Edge::Dirichlet(eb)) => {
                            lap += 2.0 * eb - e(ui);
                            diag += kd * de(ui);
                        }
                        (None, _) => {
                            lap += e(ui);
                            diag -= kd * de(ui);
                        }
                    }
                }
                f[i] = (storage(ui) - old[i]) / dt - kd * lap;
                m.add_diag(i, 0, 0, diag);
            }
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = m.solve(&neg, periodic).ok_or(ReferenceError::Singular { step })?;
            for (a, d) in u.iter_mut().zip(&delta) {
                *a += d;
            }
            if inf(&delta) <= cfg.tol * (1.0 + inf(&u)) {
                converged = true;
                break;
            }
        }
        if !converged || !u.iter().all(|v| v.is_finite()) {
            return Err(ReferenceError::NewtonFailed { step, cell: 0, residual: f64::NAN });
        }
        if let Some(v) = u.iter().find(|&&v| v < -1e-12) {
            return Err(ReferenceError::Negative { value: *v });
        }
        if step % cfg.save_every == 0 || step == cfg.n_t {
            times.push(step as f64 * dt);
            snaps.push(u.clone());
        }
    }
    let rule = gauss_legendre(cfg.n_mu, Interval::Half).map_err(|e| ReferenceError::Config(e.to_string()))?;
    let mut mu: Vec<f64> = rule.nodes().iter().rev().map(|m| -m).collect();
    mu.extend_from_slice(rule.nodes());
    let rho_of = |v: f64| if gray { 0.5 * ac * v.powi(4) } else { v };
    let rho: Vec<f64> = snaps.iter().flatten().map(|&v| rho_of(v)).collect();
    let intensity: Vec<f64> = rho.iter().flat_map(|&r| std::iter::repeat(r).take(mu.len())).collect();
    let temperature = gray.then(|| snaps.iter().flatten().copied().collect::<Vec<f64>>());
    Ok(GridSolution {
        problem: spec.id,
        epsilon: 0.0,
        x,
        times,
        mu,
        intensity,
        rho,
        radiation_temperature: temperature.clone(),
        temperature,
        meta: SolverMeta { scheme: "diffusion-limit".into(), n_x: n, n_t: cfg.n_t, n_mu: cfg.n_mu, tol: cfg.tol },
    })
}
