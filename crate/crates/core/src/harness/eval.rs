//! Relative errors of trained fields against a reference grid.

use std::fmt::Write as _;
use std::path::Path;

use super::plot::profile_svg;
use super::{method_label, parse_method_label, relative_l2, HarnessError};
use crate::losses::{Method, NetSet, Role};
use crate::network::wrap_eval;
use crate::physics::{ProblemId, ProblemSpec};
use crate::quadrature::{gauss_legendre, Interval};
use crate::reference::{sample_reference, GridSolution, Quantity};

/// Position of the material-temperature time series.
pub const T_E_POSITION: f64 = 0.0025;

/// Anything that yields `ρ` and (if present) `T` at `(t, x)` points.
pub trait FieldSource {
    fn fields(&self, points: &[(f64, f64)]) -> Result<(Vec<f64>, Option<Vec<f64>>), HarnessError>;
}

impl FieldSource for GridSolution {
    fn fields(&self, points: &[(f64, f64)]) -> Result<(Vec<f64>, Option<Vec<f64>>), HarnessError> {
        let rho = sample_reference(self, Quantity::Rho, points)?;
        let t = match self.temperature {
            Some(_) => Some(sample_reference(self, Quantity::T, points)?),
            None => None,
        };
        Ok((rho, t))
    }
}

/// Trained networks with the method's reconstruction of `ρ`.
pub struct NetModel<'a> {
    pub nets: &'a NetSet,
    pub method: Method,
    pub spec: &'a ProblemSpec,
    pub quad_points: usize,
}

impl FieldSource for NetModel<'_> {
    fn fields(&self, points: &[(f64, f64)]) -> Result<(Vec<f64>, Option<Vec<f64>>), HarnessError> {
        let cfg_err = |m: &str| HarnessError::Config(m.to_string());
        let q = gauss_legendre(self.quad_points, Interval::Full).map_err(|e| cfg_err(&e.to_string()))?;
        let h = gauss_legendre(self.quad_points, Interval::Half).map_err(|e| cfg_err(&e.to_string()))?;
        let net = |role: Role| self.nets.get(role).ok_or_else(|| cfg_err(&format!("missing {} network", role.name())));
        let mut rho = Vec::with_capacity(points.len());
        let mut temp = Vec::with_capacity(points.len());
        let t_net = if self.spec.has_temperature() { Some(net(Role::T)?) } else { None };
        for &(t, x) in points {
            let coords: Vec<f64> = if self.spec.is_stationary() { vec![x] } else { vec![t, x] };
            let r = match self.method {
                Method::Pinn => {
                    let f = net(Role::I)?;
                    let mut s = 0.0;
                    for (&m, &w) in q.nodes().iter().zip(q.weights()) {
                        s += 0.5 * w * wrap_eval(&f.net, f.wrapper, &coords, Some(m))?;
                    }
                    s
                }
                Method::Mm => {
                    let f = net(Role::Rho)?;
                    wrap_eval(&f.net, f.wrapper, &coords, None)?
                }
                Method::Eo => {
                    let f = net(Role::R)?;
                    let mut s = 0.0;
                    for (&m, &w) in h.nodes().iter().zip(h.bracket_weights().iter()) {
                        s += w * wrap_eval(&f.net, f.wrapper, &coords, Some(m))?;
                    }
                    s
                }
            };
            rho.push(r);
            if let Some(f) = t_net {
                temp.push(wrap_eval(&f.net, f.wrapper, &coords, None)?);
            }
        }
        if rho.iter().chain(&temp).any(|v| !v.is_finite()) {
            return Err(HarnessError::NonFinite("network fields".into()));
        }
        Ok((rho, t_net.map(|_| temp)))
    }
}

/// What to compare for one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPlan {
    /// Quantities compared as profiles in `x`.
    pub profile_quantities: Vec<Quantity>,
    /// Profile times; ignored for steady problems.
    pub profile_times: Vec<f64>,
    /// Position of a `T_e` time series, if any.
    pub te_position: Option<f64>,
    /// Restricts profiles to `x` in this closed range.
    pub x_range: Option<(f64, f64)>,
}

impl EvalPlan {
    pub fn for_problem(id: ProblemId) -> Self {
        match id {
            ProblemId::P1 => EvalPlan {
                profile_quantities: vec![Quantity::Rho],
                profile_times: vec![0.1],
                te_position: None,
                x_range: None,
            },
            ProblemId::P2 => EvalPlan {
                profile_quantities: vec![Quantity::Rho, Quantity::T],
                profile_times: vec![],
                te_position: None,
                x_range: None,
            },
            ProblemId::P3 => EvalPlan {
                profile_quantities: vec![Quantity::Tr],
                profile_times: vec![0.1, 0.2, 0.3, 0.4, 0.5],
                te_position: Some(T_E_POSITION),
                x_range: None,
            },
            ProblemId::P4 => EvalPlan {
                profile_quantities: vec![Quantity::Tr],
                profile_times: vec![0.2, 0.4, 0.6, 0.8],
                te_position: Some(T_E_POSITION),
                x_range: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub problem: ProblemId,
    pub method: Method,
    pub epsilon: f64,
    /// `rho`, `T`, `T_e` or `T_r`.
    pub quantity: String,
    /// `None` for the `T_e` series and steady profiles.
    pub time: Option<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "problem,method,epsilon,quantity,time,error";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let time = r.time.map(|t| format!("{t}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:e},{},{},{:e}", r.problem.name(), method_label(r.method), r.epsilon, r.quantity, time, r.error);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let bad = |l: &str| HarnessError::Report(l.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(bad("missing header"));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let p: Vec<&str> = line.split(',').collect();
            if p.len() != 6 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            rows.push(ErrorRow {
                problem: ProblemId::parse(p[0]).map_err(|_| bad(line))?,
                method: parse_method_label(p[1]).ok_or_else(|| bad(line))?,
                epsilon: num(p[2])?,
                quantity: p[3].to_string(),
                time: if p[4].is_empty() { None } else { Some(num(p[4])?) },
                error: num(p[5])?,
            });
        }
        Ok(ErrorReport { rows })
    }

    /// Error of `quantity` at `time` (`None` for series/steady rows).
    pub fn get(&self, quantity: &str, time: Option<f64>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.quantity == quantity && r.time.map(|t| (t * 1e9).round()) == time.map(|t| (t * 1e9).round()))
            .map(|r| r.error)
    }
}

/// Network and reference values along one line of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub quantity: String,
    pub time: Option<f64>,
    /// `"x"` for profiles, `"t"` for the time series.
    pub axis: &'static str,
    pub abscissa: Vec<f64>,
    pub network: Vec<f64>,
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: ErrorReport,
    pub profiles: Vec<Profile>,
}

fn radiation_temperature(rho: &[f64], ac: f64) -> Vec<f64> {
    rho.iter().map(|r| (2.0 * r.max(0.0) / ac).powf(0.25)).collect()
}

/// Compares `model` with `reference` on the grid of `plan`.
pub fn evaluate_run(
    model: &dyn FieldSource,
    spec: &ProblemSpec,
    method: Method,
    reference: &GridSolution,
    plan: &EvalPlan,
) -> Result<Evaluation, HarnessError> {
    let ac = spec.a * spec.c;
    let xs: Vec<f64> = reference
        .x
        .iter()
        .copied()
        .filter(|&x| plan.x_range.map_or(true, |(a, b)| x >= a && x <= b))
        .collect();
    let mut profiles = Vec::new();
    let times: Vec<Option<f64>> =
        if spec.is_stationary() { vec![None] } else { plan.profile_times.iter().map(|&t| Some(t)).collect() };
    for &time in &times {
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (time.unwrap_or(0.0), x)).collect();
        let (rho, temp) = model.fields(&pts)?;
        for &q in &plan.profile_quantities {
            let network = match q {
                Quantity::Rho => rho.clone(),
                Quantity::T => temp.clone().ok_or(HarnessError::Config("model has no temperature".into()))?,
                Quantity::Tr => radiation_temperature(&rho, ac),
            };
            let reference_vals = match (q, &reference.radiation_temperature) {
                (Quantity::Tr, None) => radiation_temperature(&sample_reference(reference, Quantity::Rho, &pts)?, ac),
                _ => sample_reference(reference, q, &pts)?,
            };
            profiles.push(Profile {
                quantity: q.name().to_string(),
                time,
                axis: "x",
                abscissa: xs.clone(),
                network,
                reference: reference_vals,
            });
        }
    }
    if let Some(xe) = plan.te_position {
        let ts: Vec<f64> = reference.times.iter().copied().filter(|&t| t > 0.0).collect();
        let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t, xe)).collect();
        let (_, temp) = model.fields(&pts)?;
        let network = temp.ok_or(HarnessError::Config("model has no temperature".into()))?;
        profiles.push(Profile {
            quantity: "T_e".into(),
            time: None,
            axis: "t",
            abscissa: ts,
            network,
            reference: sample_reference(reference, Quantity::T, &pts)?,
        });
    }
    let rows = profiles
        .iter()
        .map(|p| {
            Ok(ErrorRow {
                problem: spec.id,
                method,
                epsilon: spec.epsilon,
                quantity: p.quantity.clone(),
                time: p.time,
                error: relative_l2(&p.network, &p.reference)?,
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(Evaluation { report: ErrorReport { rows }, profiles })
}

impl Evaluation {
    /// Writes `errors.csv`, `profiles.csv` and one SVG per profile.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("errors.csv"), self.report.to_csv())?;
        let mut s = String::from("quantity,time,axis,abscissa,network,reference\n");
        for p in &self.profiles {
            let time = p.time.map(|t| format!("{t}")).unwrap_or_default();
            for ((a, n), r) in p.abscissa.iter().zip(&p.network).zip(&p.reference) {
                let _ = writeln!(s, "{},{time},{},{a:e},{n:e},{r:e}", p.quantity, p.axis);
            }
        }
        std::fs::write(dir.join("profiles.csv"), s)?;
        for p in &self.profiles {
            let name = match p.time {
                Some(t) => format!("{}_t{t}.svg", p.quantity),
                None => format!("{}.svg", p.quantity),
            };
            let title = match p.time {
                Some(t) => format!("{} at t = {t}", p.quantity),
                None => p.quantity.clone(),
            };
            std::fs::write(dir.join(name), profile_svg(&title, p.axis, &p.quantity, &p.abscissa, &p.reference, &p.network))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{solve_kinetic, solve_stationary, KineticConfig};

    #[test]
    fn self_comparison_is_exact() {
        for (id, eps) in [(ProblemId::P3, 1.0), (ProblemId::P4, 1.0), (ProblemId::P1, 1e-3), (ProblemId::P2, 1e-3)] {
            let spec = ProblemSpec::with_epsilon(id, eps);
            let t_end = spec.t_end.unwrap_or(0.0);
            let n_t = if id == ProblemId::P4 { 40 } else { 20 };
            let cfg = KineticConfig { n_x: if id == ProblemId::P4 { 100 } else { 400 }, n_t, n_mu: 4, save_every: 2, ..Default::default() };
            let reference = if spec.is_stationary() { solve_stationary(&spec, &cfg) } else { solve_kinetic(&spec, &cfg) }.unwrap();
            assert!(t_end == 0.0 || (reference.times.last().unwrap() - t_end).abs() < 1e-12);
            let ev = evaluate_run(&reference, &spec, Method::Eo, &reference, &EvalPlan::for_problem(id)).unwrap();
            assert!(!ev.report.rows.is_empty());
            for r in &ev.report.rows {
                assert!(r.error <= 1e-10, "{id:?} {} {:?}: {}", r.quantity, r.time, r.error);
            }
        }
    }

    #[test]
    fn report_csv_round_trip() {
        let report = ErrorReport {
            rows: vec![
                ErrorRow { problem: ProblemId::P3, method: Method::Mm, epsilon: 1e-3, quantity: "T_e".into(), time: None, error: 1.5e-3 },
                ErrorRow { problem: ProblemId::P3, method: Method::Mm, epsilon: 1e-3, quantity: "T_r".into(), time: Some(0.1), error: 2.25e-4 },
            ],
        };
        let back = ErrorReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.get("T_r", Some(0.1)), Some(2.25e-4));
        assert_eq!(back.get("T_e", None), Some(1.5e-3));
    }
}
