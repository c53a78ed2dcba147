//! Gridded reference solutions, interpolation and CSV round-trip.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReferenceError;
use crate::physics::ProblemId;

/// Scalar output fields of a reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    /// Material temperature.
    #[serde(rename = "T")]
    T,
    /// `⟨I⟩`.
    #[serde(rename = "rho")]
    Rho,
    /// Radiation temperature `(2⟨I⟩/ac)^{1/4}`.
    #[serde(rename = "T_r")]
    Tr,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::T => "T",
            Quantity::Rho => "rho",
            Quantity::Tr => "T_r",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Quantity::T, Quantity::Rho, Quantity::Tr].into_iter().find(|q| q.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub scheme: String,
    pub n_x: usize,
    pub n_t: usize,
    pub n_mu: usize,
    pub tol: f64,
}

/// Snapshots of a solution on cell centres at saved times.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub problem: ProblemId,
    pub epsilon: f64,
    /// Cell centres, increasing.
    pub x: Vec<f64>,
    /// Saved times, increasing (`[0]` for steady solutions).
    pub times: Vec<f64>,
    /// Full-range angular nodes, increasing.
    pub mu: Vec<f64>,
    /// Intensity, indexed `[time][x][mu]`; empty if not stored.
    pub intensity: Vec<f64>,
    /// `[time][x]` fields.
    pub rho: Vec<f64>,
    pub temperature: Option<Vec<f64>>,
    pub radiation_temperature: Option<Vec<f64>>,
    pub meta: SolverMeta,
}

impl GridSolution {
    pub fn field(&self, q: Quantity) -> Option<&[f64]> {
        match q {
            Quantity::Rho => Some(&self.rho),
            Quantity::T => self.temperature.as_deref(),
            Quantity::Tr => self.radiation_temperature.as_deref(),
        }
    }

    pub fn quantities(&self) -> Vec<Quantity> {
        [Quantity::T, Quantity::Rho, Quantity::Tr].into_iter().filter(|&q| self.field(q).is_some()).collect()
    }

    /// Field values at saved time index `k`.
    pub fn slice(&self, q: Quantity, k: usize) -> Option<&[f64]> {
        let n = self.x.len();
        self.field(q).map(|f| &f[k * n..(k + 1) * n])
    }

    /// Index of the saved time closest to `t`.
    pub fn nearest_time(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// Intensity at time index `k`, cell `i`, for all nodes.
    pub fn intensity_at(&self, k: usize, i: usize) -> Option<&[f64]> {
        let (nx, nm) = (self.x.len(), self.mu.len());
        if self.intensity.is_empty() {
            return None;
        }
        let off = (k * nx + i) * nm;
        Some(&self.intensity[off..off + nm])
    }

    pub fn check_nonnegative(&self, tol: f64) -> Result<(), ReferenceError> {
        let fields = [Some(&self.intensity), Some(&self.rho), self.temperature.as_ref()];
        for v in fields.into_iter().flatten().flatten() {
            if *v < -tol || !v.is_finite() {
                return Err(ReferenceError::Negative { value: *v });
            }
        }
        Ok(())
    }
}

/// Interval containing `v` in an increasing grid and the weight of the
/// upper end; `None` outside the hull.
fn locate(grid: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if n == 1 {
        return (v == grid[0]).then_some((0, 0.0));
    }
    if v < grid[0] || v > grid[n - 1] || v.is_nan() {
        return None;
    }
    let hi = grid.partition_point(|&g| g <= v).clamp(1, n - 1);
    let lo = hi - 1;
    let w = (v - grid[lo]) / (grid[hi] - grid[lo]);
    Some((lo, w))
}

/// Bilinear interpolation in `(t, x)` of a scalar field.
pub fn sample_reference(sol: &GridSolution, q: Quantity, points: &[(f64, f64)]) -> Result<Vec<f64>, ReferenceError> {
    let f = sol.field(q).ok_or(ReferenceError::MissingQuantity(q))?;
    let nx = sol.x.len();
    points
        .iter()
        .map(|&(t, x)| {
            let (kt, wt) = locate(&sol.times, t).ok_or(ReferenceError::Extrapolation { t, x })?;
            let (ix, wx) = locate(&sol.x, x).ok_or(ReferenceError::Extrapolation { t, x })?;
            let at = |k: usize, i: usize| f[k * nx + i];
            let row = |k: usize| {
                if wx == 0.0 {
                    at(k, ix)
                } else {
                    (1.0 - wx) * at(k, ix) + wx * at(k, ix + 1)
                }
            };
            Ok(if wt == 0.0 { row(kt) } else { (1.0 - wt) * row(kt) + wt * row(kt + 1) })
        })
        .collect()
}

/// Writes the scalar fields as long-format CSV with a `# key=value` header.
pub fn write_reference_csv(sol: &GridSolution, path: &Path) -> Result<(), ReferenceError> {
    let mut s = String::new();
    let m = &sol.meta;
    let _ = writeln!(s, "# problem={}", sol.problem.name());
    let _ = writeln!(s, "# epsilon={:e}", sol.epsilon);
    let _ = writeln!(s, "# scheme={}", m.scheme);
    let _ = writeln!(s, "# N_x={}", m.n_x);
    let _ = writeln!(s, "# N_t={}", m.n_t);
    let _ = writeln!(s, "# n_mu={}", m.n_mu);
    let _ = writeln!(s, "# tol={:e}", m.tol);
    s.push_str("t,x,quantity,value\n");
    for q in sol.quantities() {
        for (k, &t) in sol.times.iter().enumerate() {
            for (i, &x) in sol.x.iter().enumerate() {
                let v = sol.field(q).expect("listed")[k * sol.x.len() + i];
                let _ = writeln!(s, "{t:e},{x:e},{},{v:e}", q.name());
            }
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Reads a CSV written by [`write_reference_csv`]. Intensities are not
/// stored in the CSV, so the returned solution has none.
pub fn read_reference_csv(path: &Path) -> Result<GridSolution, ReferenceError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |m: &str| ReferenceError::Format(m.to_string());
    let mut meta = std::collections::HashMap::new();
    let mut rows: Vec<(f64, f64, Quantity, f64)> = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line.starts_with("t,") || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(line));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        let q = Quantity::parse(parts[2]).ok_or_else(|| bad(parts[2]))?;
        rows.push((num(parts[0])?, num(parts[1])?, q, num(parts[3])?));
    }
    let get = |k: &str| meta.get(k).cloned().ok_or_else(|| bad(k));
    let problem = ProblemId::parse(&get("problem")?).map_err(|e| bad(&e.to_string()))?;
    let parse_u = |k: &str| -> Result<usize, ReferenceError> { get(k)?.parse().map_err(|_| bad(k)) };
    let parse_f = |k: &str| -> Result<f64, ReferenceError> { get(k)?.parse().map_err(|_| bad(k)) };
    let mut times: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for &(t, x, _, _) in &rows {
        if !times.contains(&t) {
            times.push(t);
        }
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    times.sort_by(f64::total_cmp);
    xs.sort_by(f64::total_cmp);
    let (nt, nx) = (times.len(), xs.len());
    let mut fields: std::collections::HashMap<Quantity, Vec<f64>> = std::collections::HashMap::new();
    for &(t, x, q, v) in &rows {
        let k = times.partition_point(|&s| s < t);
        let i = xs.partition_point(|&s| s < x);
        fields.entry(q).or_insert_with(|| vec![f64::NAN; nt * nx])[k * nx + i] = v;
    }
    if fields.values().flatten().any(|v| v.is_nan()) {
        return Err(bad("incomplete grid"));
    }
    Ok(GridSolution {
        problem,
        epsilon: parse_f("epsilon")?,
        x: xs,
        times,
        mu: Vec::new(),
        intensity: Vec::new(),
        rho: fields.remove(&Quantity::Rho).ok_or_else(|| bad("rho"))?,
        temperature: fields.remove(&Quantity::T),
        radiation_temperature: fields.remove(&Quantity::Tr),
        meta: SolverMeta {
            scheme: get("scheme")?,
            n_x: parse_u("N_x")?,
            n_t: parse_u("N_t")?,
            n_mu: parse_u("n_mu")?,
            tol: parse_f("tol")?,
        },
    })
}
