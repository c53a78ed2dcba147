//! Even/odd parity finite-volume solver for the kinetic problems.
//!
//! Unknowns per cell are the even parts `r(μₖ)` at the cell centre and,
//! for the gray problems, the temperature. The odd parts `j(μₖ)` live on
//! faces and are eliminated: the odd equation is linear in `j`, so each
//! face value is an affine function of the two neighbouring `r`.

use serde::{Deserialize, Serialize};

use super::grid::{GridSolution, SolverMeta};
use super::linalg::BlockTridiag;
use super::ReferenceError;
use crate::physics::{BoundaryKind, ProblemId, ProblemSpec, Side};
use crate::quadrature::{gauss_legendre, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KineticConfig {
    /// Number of cells.
    pub n_x: usize,
    /// Number of time steps (ignored by the steady solver).
    pub n_t: usize,
    /// Half-range Gauss points.
    pub n_mu: usize,
    /// Newton stops when `‖δ‖∞ ≤ tol (1 + ‖u‖∞)`.
    pub tol: f64,
    pub max_newton: usize,
    /// Keep every `save_every`-th step (the initial state is always kept).
    pub save_every: usize,
    /// Allowed negativity of the even parts relative to the largest one.
    pub negativity_tol: f64,
}

impl Default for KineticConfig {
    fn default() -> Self {
        KineticConfig { n_x: 400, n_t: 2000, n_mu: 16, tol: 1e-10, max_newton: 50, save_every: 20, negativity_tol: 1e-8 }
    }
}

impl KineticConfig {
    fn validate(&self, steady: bool) -> Result<(), ReferenceError> {
        let bad = |m: &str| Err(ReferenceError::Config(m.to_string()));
        if self.n_x < 3 {
            return bad("n_x must be at least 3");
        }
        if !steady && (self.n_t == 0 || self.save_every == 0) {
            return bad("n_t and save_every must be positive");
        }
        if self.n_mu == 0 || self.n_mu > crate::quadrature::MAX_POINTS {
            return bad("n_mu out of range");
        }
        if !(self.tol > 0.0) || self.max_newton == 0 {
            return bad("tol and max_newton must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Regime {
    Linear,
    Gray,
    Steady,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Edge {
    Inflow(f64),
    Reflective,
    Periodic,
}

/// Face coefficients: `j = q + al·r_left + ar·r_right`, indexed `[face][k]`.
struct Faces {
    q: Vec<f64>,
    al: Vec<f64>,
    ar: Vec<f64>,
}

struct Scheme {
    regime: Regime,
    n: usize,
    nk: usize,
    b: usize,
    dx: f64,
    x0: f64,
    mu: Vec<f64>,
    w: Vec<f64>,
    eps: f64,
    c: f64,
    sigma: f64,
    s0: f64,
    ac: f64,
    cv: f64,
    left: Edge,
    right: Edge,
    t_left: f64,
    t_right: f64,
}

impl Scheme {
    fn new(spec: &ProblemSpec, cfg: &KineticConfig) -> Result<Self, ReferenceError> {
        spec.validate().map_err(|e| ReferenceError::Config(e.to_string()))?;
        let regime = if spec.is_stationary() {
            Regime::Steady
        } else if spec.has_temperature() {
            Regime::Gray
        } else {
            Regime::Linear
        };
        cfg.validate(regime == Regime::Steady)?;
        let rule = gauss_legendre(cfg.n_mu, Interval::Half).map_err(|e| ReferenceError::Config(e.to_string()))?;
        let ac = spec.a * spec.c;
        let edge = |side: Side| -> Result<Edge, ReferenceError> {
            if spec.is_periodic() {
                return Ok(Edge::Periodic);
            }
            for bc in spec.boundaries.iter().filter(|b| b.side == side) {
                match bc.kind {
                    BoundaryKind::InflowConstant { value } => return Ok(Edge::Inflow(value)),
                    BoundaryKind::PlanckianIncident { source_temperature } => {
                        return Ok(Edge::Inflow(0.5 * ac * source_temperature.powi(4)))
                    }
                    BoundaryKind::Reflective => return Ok(Edge::Reflective),
                    _ => {}
                }
            }
            Err(ReferenceError::Unsupported { problem: spec.id, reason: "missing angular boundary condition" })
        };
        let dirichlet = |side: Side| {
            spec.boundaries.iter().find_map(|b| match b.kind {
                BoundaryKind::DirichletT { value } if b.side == side => Some(value),
                _ => None,
            })
        };
        let (t_left, t_right) = match regime {
            Regime::Steady => match (dirichlet(Side::Left), dirichlet(Side::Right)) {
                (Some(l), Some(r)) => (l, r),
                _ => {
                    return Err(ReferenceError::Unsupported {
                        problem: spec.id,
                        reason: "steady solver needs temperature on both ends",
                    })
                }
            },
            _ => (0.0, 0.0),
        };
        let nk = cfg.n_mu;
        Ok(Scheme {
            regime,
            n: cfg.n_x,
            nk,
            b: if regime == Regime::Linear { nk } else { nk + 1 },
            dx: (spec.x_right - spec.x_left) / cfg.n_x as f64,
            x0: spec.x_left,
            mu: rule.nodes().to_vec(),
            w: rule.bracket_weights(),
            eps: spec.epsilon,
            c: spec.c,
            sigma: spec.sigma,
            s0: spec.sigma0.sqrt(),
            ac,
            cv: spec.cv,
            left: edge(Side::Left)?,
            right: edge(Side::Right)?,
            t_left,
            t_right,
        })
    }

    fn periodic(&self) -> bool {
        self.left == Edge::Periodic
    }

    fn centres(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x0 + (i as f64 + 0.5) * self.dx).collect()
    }

    /// Face coefficients for one step; `dt_inv = 0` for the steady problem.
    fn faces(&self, dt_inv: f64, j_old: &[f64]) -> Faces {
        let (n, nk) = (self.n, self.nk);
        let gamma = self.eps * self.eps / (self.c * self.s0) * dt_inv;
        let d = gamma + self.sigma / self.s0;
        let e = self.eps / self.s0;
        let h = 0.5 * self.dx;
        let len = (n + 1) * nk;
        let mut fc = Faces { q: vec![0.0; len], al: vec![0.0; len], ar: vec![0.0; len] };
        for f in 0..=n {
            for k in 0..nk {
                let idx = f * nk + k;
                let mu = self.mu[k];
                let jo = gamma * j_old[idx];
                let interior = (f > 0 && f < n) || self.periodic();
                if interior {
                    fc.q[idx] = jo / d;
                    fc.al[idx] = mu / (self.dx * d);
                    fc.ar[idx] = -mu / (self.dx * d);
                    continue;
                }
                let big_e = d + e * mu / h;
                match (f == 0, if f == 0 { self.left } else { self.right }) {
                    (_, Edge::Reflective) => {}
                    (true, Edge::Inflow(v)) => {
                        fc.q[idx] = (jo + mu * v / h) / big_e;
                        fc.ar[idx] = -mu / (h * big_e);
                    }
                    (false, Edge::Inflow(v)) => {
                        fc.q[idx] = (jo - mu * v / h) / big_e;
                        fc.al[idx] = mu / (h * big_e);
                    }
                    (_, Edge::Periodic) => unreachable!("handled as interior"),
                }
            }
        }
        fc
    }

    fn neighbours(&self, i: usize) -> (Option<usize>, Option<usize>) {
        let p = self.periodic();
        let l = if i > 0 { Some(i - 1) } else { p.then_some(self.n - 1) };
        let r = if i + 1 < self.n { Some(i + 1) } else { p.then_some(0) };
        (l, r)
    }

    /// Odd parts on all faces.
    fn face_values(&self, u: &[f64], fc: &Faces) -> Vec<f64> {
        let (n, nk, b) = (self.n, self.nk, self.b);
        let mut j = vec![0.0; (n + 1) * nk];
        for f in 0..=n {
            let l = if f > 0 { Some(f - 1) } else { self.periodic().then_some(n - 1) };
            let r = if f < n { Some(f) } else { self.periodic().then_some(0) };
            for k in 0..nk {
                let idx = f * nk + k;
                j[idx] = fc.q[idx]
                    + fc.al[idx] * l.map_or(0.0, |c| u[c * b + k])
                    + fc.ar[idx] * r.map_or(0.0, |c| u[c * b + k]);
            }
        }
        j
    }

    /// Residual and, if requested, Jacobian of one implicit step.
    fn system(
        &self,
        u: &[f64],
        u_old: Option<&[f64]>,
        fc: &Faces,
        dt_inv: f64,
        want_jac: bool,
    ) -> (Vec<f64>, Option<BlockTridiag>) {
        let (n, nk, b) = (self.n, self.nk, self.b);
        let (dx, sigma) = (self.dx, self.sigma);
        let alpha = self.eps * self.eps / self.c * dt_inv;
        let beta = self.eps * self.eps / self.s0;
        let old = |idx: usize| u_old.map_or(0.0, |o| o[idx]);
        let mut f = vec![0.0; n * b];
        let mut jac = want_jac.then(|| BlockTridiag::zeros(n, b));
        for i in 0..n {
            let (il, ir) = self.neighbours(i);
            let r = |c: usize, k: usize| u[c * b + k];
            let t = if self.regime == Regime::Linear { 0.0 } else { u[i * b + nk] };
            let (src, dsrc) = match self.regime {
                Regime::Gray => (0.5 * self.ac * t.powi(4), 2.0 * self.ac * t.powi(3)),
                Regime::Steady => (self.ac * t.powi(4), 4.0 * self.ac * t.powi(3)),
                Regime::Linear => ((0..nk).map(|k| self.w[k] * r(i, k)).sum(), 0.0),
            };
            let mut flux = 0.0;
            let mut storage = 0.0;
            for k in 0..nk {
                let (fm, fp) = (i * nk + k, (i + 1) * nk + k);
                let jm = fc.q[fm] + fc.al[fm] * il.map_or(0.0, |c| r(c, k)) + fc.ar[fm] * r(i, k);
                let jp = fc.q[fp] + fc.al[fp] * r(i, k) + fc.ar[fp] * ir.map_or(0.0, |c| r(c, k));
                let mu = self.mu[k];
                let g = beta * mu / dx;
                let dr = r(i, k) - old(i * b + k);
                f[i * b + k] = alpha * dr + g * (jp - jm) + sigma * (r(i, k) - src);
                flux += self.w[k] * mu * (jp - jm) / dx;
                storage += self.w[k] * dr;
                if let Some(m) = jac.as_mut() {
                    m.add_diag(i, k, k, alpha + sigma + g * (fc.al[fp] - fc.ar[fm]));
                    if ir.is_some() {
                        m.add_upper(i, k, k, g * fc.ar[fp]);
                    }
                    if il.is_some() {
                        m.add_lower(i, k, k, -g * fc.al[fm]);
                    }
                    match self.regime {
                        Regime::Linear => {
                            for l in 0..nk {
                                m.add_diag(i, k, l, -sigma * self.w[l]);
                            }
                        }
                        _ => m.add_diag(i, k, nk, -sigma * dsrc),
                    }
                }
            }
            // Coefficient of the angular flux divergence in the temperature row.
            let flux_coef = match self.regime {
                Regime::Linear => continue,
                Regime::Gray => {
                    let row = i * b + nk;
                    f[row] = self.cv * (t - old(row)) * dt_inv + 2.0 * dt_inv / self.c * storage + 2.0 / self.s0 * flux;
                    if let Some(m) = jac.as_mut() {
                        m.add_diag(i, nk, nk, self.cv * dt_inv);
                        for k in 0..nk {
                            m.add_diag(i, nk, k, 2.0 * dt_inv / self.c * self.w[k]);
                        }
                    }
                    2.0 / self.s0
                }
                Regime::Steady => {
                    let row = i * b + nk;
                    let inv = 1.0 / (dx * dx);
                    let tl = il.map_or(2.0 * self.t_left - t, |c| u[c * b + nk]);
                    let tr = ir.map_or(2.0 * self.t_right - t, |c| u[c * b + nk]);
                    f[row] = (tl - 2.0 * t + tr) * inv - flux / self.s0;
                    if let Some(m) = jac.as_mut() {
                        let ghosts = il.is_none() as usize + ir.is_none() as usize;
                        m.add_diag(i, nk, nk, -(2.0 + ghosts as f64) * inv);
                        if il.is_some() {
                            m.add_lower(i, nk, nk, inv);
                        }
                        if ir.is_some() {
                            m.add_upper(i, nk, nk, inv);
                        }
                    }
                    -1.0 / self.s0
                }
            };
            if let Some(m) = jac.as_mut() {
                for k in 0..nk {
                    let (fm, fp) = (i * nk + k, (i + 1) * nk + k);
                    let s = flux_coef * self.w[k] * self.mu[k] / dx;
                    m.add_diag(i, nk, k, s * (fc.al[fp] - fc.ar[fm]));
                    if ir.is_some() {
                        m.add_upper(i, nk, k, s * fc.ar[fp]);
                    }
                    if il.is_some() {
                        m.add_lower(i, nk, k, -s * fc.al[fm]);
                    }
                }
            }
        }
        (f, jac)
    }

    /// Damped Newton for one implicit step, updating `u` in place.
    fn newton(
        &self,
        u: &mut Vec<f64>,
        u_old: Option<&[f64]>,
        fc: &Faces,
        dt_inv: f64,
        cfg: &KineticConfig,
        step: usize,
    ) -> Result<(), ReferenceError> {
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..cfg.max_newton {
            let (f, jac) = self.system(u, u_old, fc, dt_inv, true);
            let fnorm = inf(&f);
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = jac.expect("requested").solve(&neg, self.periodic()).ok_or(ReferenceError::Singular { step })?;
            let mut lam = 1.0;
            let trial = loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lam * d).collect();
                if lam < 1.0 / 64.0 {
                    break trial;
                }
                let (ft, _) = self.system(&trial, u_old, fc, dt_inv, false);
                let ftn = inf(&ft);
                if ftn.is_finite() && ftn <= (1.0 - 1e-4 * lam) * fnorm.max(f64::MIN_POSITIVE) {
                    break trial;
                }
                if fnorm < 1e-13 * (1.0 + inf(u)) {
                    break trial;
                }
                lam *= 0.5;
            };
            *u = trial;
            if !u.iter().all(|v| v.is_finite()) {
                break;
            }
            if lam * inf(&delta) <= cfg.tol * (1.0 + inf(u)) {
                return Ok(());
            }
        }
        let (f, _) = self.system(u, u_old, fc, dt_inv, false);
        let (mut worst, mut cell) = (0.0, 0);
        for (idx, v) in f.iter().enumerate() {
            if !(v.abs() <= worst) {
                worst = v.abs();
                cell = idx / self.b;
            }
        }
        Err(ReferenceError::NewtonFailed { step, cell, residual: worst })
    }

    /// Guards the solved unknowns. Reconstructed `r ± (ε/√σ0) j` may dip
    /// below zero inside unresolved boundary or initial layers and is not
    /// checked.
    fn check_positive(&self, u: &[f64], tol: f64) -> Result<(), ReferenceError> {
        let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.n {
            for k in 0..self.nk {
                let r = u[i * self.b + k];
                if !r.is_finite() || r < -tol * scale {
                    return Err(ReferenceError::Negative { value: r });
                }
            }
            if self.regime != Regime::Linear {
                let t = u[i * self.b + self.nk];
                if !t.is_finite() || t < -tol {
                    return Err(ReferenceError::Negative { value: t });
                }
            }
        }
        Ok(())
    }
}

/// Accumulates snapshots into a [`GridSolution`].
struct Recorder {
    times: Vec<f64>,
    intensity: Vec<f64>,
    rho: Vec<f64>,
    temperature: Vec<f64>,
    tr: Vec<f64>,
}

impl Recorder {
    fn new() -> Self {
        Recorder { times: Vec::new(), intensity: Vec::new(), rho: Vec::new(), temperature: Vec::new(), tr: Vec::new() }
    }

    fn push(&mut self, s: &Scheme, t: f64, u: &[f64], j: &[f64]) {
        let e = s.eps / s.s0;
        self.times.push(t);
        for i in 0..s.n {
            let r = |k: usize| u[i * s.b + k];
            let jc = |k: usize| 0.5 * (j[i * s.nk + k] + j[(i + 1) * s.nk + k]);
            for k in (0..s.nk).rev() {
                self.intensity.push(r(k) - e * jc(k));
            }
            for k in 0..s.nk {
                self.intensity.push(r(k) + e * jc(k));
            }
            let rho: f64 = (0..s.nk).map(|k| s.w[k] * r(k)).sum();
            self.rho.push(rho);
            if s.regime != Regime::Linear {
                self.temperature.push(u[i * s.b + s.nk]);
                self.tr.push((2.0 * rho.max(0.0) / s.ac).powf(0.25));
            }
        }
    }

    fn finish(self, s: &Scheme, spec: &ProblemSpec, cfg: &KineticConfig, scheme: &str) -> GridSolution {
        let gray = s.regime != Regime::Linear;
        let mut mu: Vec<f64> = s.mu.iter().rev().map(|m| -m).collect();
        mu.extend_from_slice(&s.mu);
        GridSolution {
            problem: spec.id,
            epsilon: spec.epsilon,
            x: s.centres(),
            times: self.times,
            mu,
            intensity: self.intensity,
            rho: self.rho,
            temperature: gray.then_some(self.temperature),
            radiation_temperature: gray.then_some(self.tr),
            meta: SolverMeta {
                scheme: scheme.to_string(),
                n_x: cfg.n_x,
                n_t: if s.regime == Regime::Steady { 0 } else { cfg.n_t },
                n_mu: cfg.n_mu,
                tol: cfg.tol,
            },
        }
    }
}

/// Time-dependent kinetic solution of P1, P3 or P4 on `[0, t_end]`.
pub fn solve_kinetic(spec: &ProblemSpec, cfg: &KineticConfig) -> Result<GridSolution, ReferenceError> {
    let s = Scheme::new(spec, cfg)?;
    if s.regime == Regime::Steady {
        return Err(ReferenceError::Unsupported { problem: spec.id, reason: "use the steady solver" });
    }
    let t_end = spec.t_end.expect("validated");
    let dt = t_end / cfg.n_t as f64;
    let mut u = vec![0.0; s.n * s.b];
    for (i, &x) in s.centres().iter().enumerate() {
        let i0 = spec.initial_intensity(x, 0.0).expect("validated");
        for k in 0..s.nk {
            u[i * s.b + k] = i0;
        }
        if s.regime == Regime::Gray {
            u[i * s.b + s.nk] = spec.initial_temperature(x).unwrap_or(0.0);
        }
    }
    let mut j = vec![0.0; (s.n + 1) * s.nk];
    let mut rec = Recorder::new();
    rec.push(&s, 0.0, &u, &j);
    for step in 1..=cfg.n_t {
        let fc = s.faces(1.0 / dt, &j);
        let u_old = u.clone();
        s.newton(&mut u, Some(&u_old), &fc, 1.0 / dt, cfg, step)?;
        j = s.face_values(&u, &fc);
        s.check_positive(&u, cfg.negativity_tol)?;
        if step % cfg.save_every == 0 || step == cfg.n_t {
            rec.push(&s, step as f64 * dt, &u, &j);
        }
    }
    Ok(rec.finish(&s, spec, cfg, "even-odd-fv-backward-euler"))
}

/// Steady kinetic solution of P2.
pub fn solve_stationary(spec: &ProblemSpec, cfg: &KineticConfig) -> Result<GridSolution, ReferenceError> {
    if spec.id != ProblemId::P2 && !spec.is_stationary() {
        return Err(ReferenceError::Unsupported { problem: spec.id, reason: "problem is time dependent" });
    }
    let s = Scheme::new(spec, cfg)?;
    let mut u = vec![0.0; s.n * s.b];
    let len = spec.x_right - spec.x_left;
    for (i, &x) in s.centres().iter().enumerate() {
        let th = (x - spec.x_left) / len;
        let t = (1.0 - th) * s.t_left + th * s.t_right;
        for k in 0..s.nk {
            u[i * s.b + k] = s.ac * t.powi(4);
        }
        u[i * s.b + s.nk] = t;
    }
    let zeros = vec![0.0; (s.n + 1) * s.nk];
    let fc = s.faces(0.0, &zeros);
    s.newton(&mut u, None, &fc, 0.0, cfg, 0)?;
    let j = s.face_values(&u, &fc);
    s.check_positive(&u, cfg.negativity_tol)?;
    let mut rec = Recorder::new();
    rec.push(&s, 0.0, &u, &j);
    Ok(rec.finish(&s, spec, cfg, "even-odd-fv-steady"))
}
