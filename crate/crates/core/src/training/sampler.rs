//! Uniform collocation sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{BoundarySample, InitialSample, InteriorSample, Method, SampleSet};
use crate::physics::{BoundaryKind, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_interior: usize,
    /// Split evenly across the boundary conditions.
    pub n_boundary: usize,
    pub n_initial: usize,
    /// Interior samples sharing one `(t, x)` point, each with its own
    /// random angle; angular averages are then evaluated once per point.
    pub angles_per_point: usize,
    /// Draw fresh points every iteration; otherwise the first batch is reused.
    pub resample: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_interior: 2048, n_boundary: 512, n_initial: 1024, angles_per_point: 1, resample: true }
    }
}

/// `(0, 1]`, so a direction is never exactly tangent to the boundary.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

pub fn sample_batch<R: Rng>(spec: &ProblemSpec, method: Method, cfg: &SamplerConfig, rng: &mut R) -> SampleSet {
    let t_end = spec.t_end.unwrap_or(0.0);
    let time = |rng: &mut R| if t_end > 0.0 { rng.gen_range(0.0..t_end) } else { 0.0 };
    let per = cfg.angles_per_point.max(1);
    let mut interior = Vec::with_capacity(cfg.n_interior);
    while interior.len() < cfg.n_interior {
        let t = time(rng);
        let x = rng.gen_range(spec.x_left..spec.x_right);
        for _ in 0..per.min(cfg.n_interior - interior.len()) {
            let mu = if method == Method::Eo { rng.gen::<f64>() } else { rng.gen_range(-1.0..1.0) };
            interior.push(InteriorSample { t, x, mu });
        }
    }
    let nb = spec.boundaries.len();
    let mut boundary = Vec::with_capacity(cfg.n_boundary);
    for (k, bc) in spec.boundaries.iter().enumerate() {
        let count = cfg.n_boundary / nb + usize::from(k < cfg.n_boundary % nb);
        for _ in 0..count {
            let t = time(rng);
            let mu = match bc.kind {
                BoundaryKind::Periodic => rng.gen_range(-1.0..1.0),
                BoundaryKind::DirichletT { .. } => 0.0,
                _ => {
                    let m = open_unit(rng);
                    if bc.is_incoming(m) {
                        m
                    } else {
                        -m
                    }
                }
            };
            boundary.push(BoundarySample { condition: k, t, mu });
        }
    }
    let initial = if spec.is_stationary() {
        Vec::new()
    } else {
        (0..cfg.n_initial)
            .map(|_| InitialSample { x: rng.gen_range(spec.x_left..spec.x_right), mu: rng.gen_range(-1.0..1.0) })
            .collect()
    };
    SampleSet { interior, boundary, initial }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ProblemId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_stay_in_their_domains() {
        let cfg = SamplerConfig { n_interior: 20_000, n_boundary: 4_000, n_initial: 10_000, angles_per_point: 3, resample: true };
        for id in [ProblemId::P1, ProblemId::P2, ProblemId::P3, ProblemId::P4] {
            let spec = ProblemSpec::catalog(id);
            for method in [Method::Mm, Method::Eo] {
                let mut rng = ChaCha8Rng::seed_from_u64(1);
                let s = sample_batch(&spec, method, &cfg, &mut rng);
                let t_end = spec.t_end.unwrap_or(0.0);
                for p in &s.interior {
                    assert!(p.x >= spec.x_left && p.x < spec.x_right);
                    assert!(p.t >= 0.0 && (p.t < t_end || t_end == 0.0));
                    let lo = if method == Method::Eo { 0.0 } else { -1.0 };
                    assert!(p.mu >= lo && p.mu <= 1.0);
                }
                for b in &s.boundary {
                    let bc = spec.boundaries[b.condition];
                    if bc.is_angular() && bc.kind != BoundaryKind::Periodic {
                        assert!(bc.is_incoming(b.mu));
                    }
                }
                assert_eq!(s.boundary.len(), 4_000);
                for p in &s.initial {
                    assert!(p.x >= spec.x_left && p.x < spec.x_right && p.mu.abs() <= 1.0);
                }
                if spec.is_stationary() {
                    assert!(s.initial.is_empty());
                    assert!(s.interior.iter().all(|p| p.t == 0.0));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let spec = ProblemSpec::catalog(ProblemId::P4);
        let cfg = SamplerConfig { n_interior: 50, n_boundary: 10, n_initial: 20, angles_per_point: 1, resample: true };
        let a = sample_batch(&spec, Method::Eo, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_batch(&spec, Method::Eo, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
