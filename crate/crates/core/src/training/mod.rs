//! Stochastic collocation training with Adam.

mod adam;
mod sampler;

pub use adam::{adam_step, lr_at, AdamState, LrSchedule};
pub use sampler::{sample_batch, SamplerConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{evaluate, LossError, LossWeights, Method, NetSet, SampleSet, GROUP_NAMES};
use crate::physics::ProblemSpec;
use crate::quadrature::DEFAULT_POINTS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub schedule: LrSchedule,
    pub weights: LossWeights,
    pub quad_points: usize,
    /// Trace row every this many iterations (and at the last one).
    pub trace_every: usize,
    /// Emit a checkpoint event every this many iterations; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 20_000,
            seed: 0,
            sampler: SamplerConfig::default(),
            schedule: LrSchedule::default(),
            weights: LossWeights::default(),
            quad_points: DEFAULT_POINTS,
            trace_every: 100,
            checkpoint_every: 0,
        }
    }
}

/// One line of the risk trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub lr: f64,
    pub total: f64,
    /// Unweighted interior, constraint, boundary and initial risks.
    pub groups: [f64; 4],
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iteration,lr,risk_total,risk_interior,risk_constraint,risk_boundary,risk_initial";

    pub fn csv(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.iteration, self.lr, self.total, self.groups[0], self.groups[1], self.groups[2], self.groups[3]
        )
    }
}

pub enum TrainEvent<'a> {
    Trace(&'a TraceRow),
    Checkpoint { iteration: usize, nets: &'a NetSet },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite risk or gradient at iteration {iteration} (groups: {})", groups.join(", "))]
    NonFinite {
        iteration: usize,
        groups: Vec<&'static str>,
        /// Parameters before the failing step.
        last_good: Box<NetSet>,
    },
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: Vec<TraceRow>,
    pub final_risk: f64,
}

/// Which loss groups produce non-finite risk or gradients on `samples`.
pub fn diagnose_non_finite(
    nets: &NetSet,
    method: Method,
    spec: &ProblemSpec,
    samples: &SampleSet,
    cfg: &TrainConfig,
) -> Vec<&'static str> {
    let lambda = cfg.weights.as_array();
    (0..4)
        .filter(|&g| lambda[g] != 0.0)
        .filter(|&g| {
            match evaluate(nets, method, spec, samples, &LossWeights::only(g), cfg.quad_points, true) {
                Ok(o) => !o.total.is_finite() || o.grads.iter().flatten().any(|v| !v.is_finite()),
                Err(_) => true,
            }
        })
        .map(|g| GROUP_NAMES[g])
        .collect()
}

/// Runs `cfg.iterations` Adam steps on fresh collocation batches. The run is
/// a pure function of `(nets, cfg)`.
pub fn train(
    spec: &ProblemSpec,
    method: Method,
    nets: &mut NetSet,
    cfg: &TrainConfig,
    mut on_event: impl FnMut(TrainEvent<'_>),
) -> Result<TrainOutcome, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = nets.flat_params();
    let mut adam = AdamState::new(theta.len());
    let mut trace = Vec::new();
    let mut fixed: Option<SampleSet> = None;
    let mut final_risk = f64::NAN;
    for it in 0..cfg.iterations {
        let samples = match (&fixed, cfg.sampler.resample) {
            (Some(s), false) => s.clone(),
            _ => {
                let s = sample_batch(spec, method, &cfg.sampler, &mut rng);
                if !cfg.sampler.resample {
                    fixed = Some(s.clone());
                }
                s
            }
        };
        let out = evaluate(nets, method, spec, &samples, &cfg.weights, cfg.quad_points, true)?;
        let grad: Vec<f64> = out.grads.concat();
        if !out.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            let groups = diagnose_non_finite(nets, method, spec, &samples, cfg);
            return Err(TrainError::NonFinite { iteration: it, groups, last_good: Box::new(nets.clone()) });
        }
        let lr = lr_at(&cfg.schedule, it);
        final_risk = out.total;
        if it % cfg.trace_every.max(1) == 0 || it + 1 == cfg.iterations {
            let row = TraceRow { iteration: it, lr, total: out.total, groups: out.group_risk };
            on_event(TrainEvent::Trace(&row));
            trace.push(row);
        }
        adam_step(&mut adam, &mut theta, &grad, lr);
        nets.set_flat_params(&theta);
        if cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 {
            on_event(TrainEvent::Checkpoint { iteration: it + 1, nets });
        }
    }
    Ok(TrainOutcome { trace, final_risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ProblemId;

    fn small_cfg(iterations: usize) -> TrainConfig {
        TrainConfig {
            iterations,
            seed: 3,
            sampler: SamplerConfig { n_interior: 32, n_boundary: 8, n_initial: 16, angles_per_point: 2, resample: true },
            trace_every: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_iterations_leave_nets_unchanged() {
        let spec = ProblemSpec::catalog(ProblemId::P1);
        let mut nets = NetSet::init(Method::Eo, &spec, |_| (4, 2), 1).unwrap();
        let before = nets.clone();
        let out = train(&spec, Method::Eo, &mut nets, &small_cfg(0), |_| {}).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(nets, before);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let spec = ProblemSpec::catalog(ProblemId::P3);
        let run = || {
            let mut nets = NetSet::init(Method::Mm, &spec, |_| (4, 2), 1).unwrap();
            let out = train(&spec, Method::Mm, &mut nets, &small_cfg(12), |_| {}).unwrap();
            (out.trace, nets.flat_params())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), pb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.iter().map(|r| r.iteration).collect::<Vec<_>>(), vec![0, 5, 10, 11]);
    }

    #[test]
    fn logged_lr_follows_schedule() {
        let spec = ProblemSpec::catalog(ProblemId::P2);
        let mut cfg = small_cfg(9);
        cfg.schedule = LrSchedule { eta0: 1e-2, gamma: 0.5, period: 4 };
        let mut nets = NetSet::init(Method::Eo, &spec, |_| (4, 2), 2).unwrap();
        let out = train(&spec, Method::Eo, &mut nets, &cfg, |_| {}).unwrap();
        for row in &out.trace {
            assert_eq!(row.lr, lr_at(&cfg.schedule, row.iteration));
            assert!(row.total.is_finite());
        }
    }

    #[test]
    fn risk_decreases_on_a_short_run() {
        let spec = ProblemSpec::catalog(ProblemId::P2);
        let mut cfg = small_cfg(150);
        cfg.schedule.eta0 = 3e-3;
        let mut nets = NetSet::init(Method::Mm, &spec, |_| (8, 2), 5).unwrap();
        let out = train(&spec, Method::Mm, &mut nets, &cfg, |_| {}).unwrap();
        let first = out.trace.first().unwrap().total;
        assert!(out.final_risk < 0.5 * first, "{first} -> {}", out.final_risk);
    }

    #[test]
    fn non_finite_risk_aborts_with_diagnosis() {
        let spec = ProblemSpec::catalog(ProblemId::P4);
        let mut nets = NetSet::init(Method::Eo, &spec, |_| (4, 2), 1).unwrap();
        let ti = nets.index_of(crate::losses::Role::T).unwrap();
        let k = nets.fields[ti].net.param_count();
        nets.fields[ti].net.params_mut()[k - 1] = f64::NAN;
        let err = train(&spec, Method::Eo, &mut nets, &small_cfg(3), |_| {}).unwrap_err();
        match err {
            TrainError::NonFinite { iteration, groups, .. } => {
                assert_eq!(iteration, 0);
                assert!(groups.contains(&"interior") && groups.contains(&"initial"));
                assert!(!groups.contains(&"boundary"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn checkpoint_events_follow_schedule() {
        let spec = ProblemSpec::catalog(ProblemId::P1);
        let mut cfg = small_cfg(7);
        cfg.checkpoint_every = 3;
        let mut nets = NetSet::init(Method::Pinn, &spec, |_| (4, 2), 1).unwrap();
        let mut seen = Vec::new();
        train(&spec, Method::Pinn, &mut nets, &cfg, |e| {
            if let TrainEvent::Checkpoint { iteration, .. } = e {
                seen.push(iteration)
            }
        })
        .unwrap();
        assert_eq!(seen, vec![3, 6]);
    }
}
