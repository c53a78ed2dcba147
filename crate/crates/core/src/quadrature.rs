//! Gauss-Legendre rules and the two angular averages used by the losses.
//!
//! `avg_full` is the `½∫_{-1}^{1}` bracket of the micro-macro system,
//! `avg_half` the `∫_0^1` bracket of the even-odd system.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_POINTS: usize = 16;
pub const MAX_POINTS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("number of Gauss points must be in 1..={MAX_POINTS}, got {0}")]
    PointCount(usize),
    #[error("rule is on {actual:?}, operation needs {expected:?}")]
    IntervalMismatch { expected: Interval, actual: Interval },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interval {
    /// `[-1, 1]`
    Full,
    /// `[0, 1]`
    Half,
}

impl Interval {
    pub fn length(self) -> f64 {
        match self {
            Interval::Full => 2.0,
            Interval::Half => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    interval: Interval,
}

/// Legendre `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nonnegative roots of `P_n` on `[-1,1]` with their weights, ascending.
fn positive_half(n: usize) -> Vec<(f64, f64)> {
    let m = n.div_ceil(2);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        // i-th largest root, Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == m - 1 {
            x = 0.0;
        }
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        // one polishing step after convergence
        let (p, dp) = legendre_with_derivative(n, x);
        if dp != 0.0 && p != 0.0 {
            x -= p / dp;
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.reverse();
    out
}

/// Gauss-Legendre rule with `n` points on `interval`.
pub fn gauss_legendre(n: usize, interval: Interval) -> Result<QuadratureRule, QuadratureError> {
    if n == 0 || n > MAX_POINTS {
        return Err(QuadratureError::PointCount(n));
    }
    let half = positive_half(n);
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    // mirror the nonnegative half so that ± pairs are exact
    for &(x, w) in half.iter().rev() {
        if x != 0.0 {
            pairs.push((-x, w));
        }
    }
    pairs.extend(half.iter().copied());
    debug_assert_eq!(pairs.len(), n);
    let (nodes, weights) = match interval {
        Interval::Full => pairs.into_iter().unzip(),
        Interval::Half => pairs.into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip(),
    };
    Ok(QuadratureRule { nodes, weights, interval })
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ f(μᵢ)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&m, &w)| w * f(m)).sum()
    }

    /// Weights of the bracket this rule implements: `½w` on the full
    /// interval, `w` on the half interval.
    pub fn bracket_weights(&self) -> Vec<f64> {
        let s = match self.interval {
            Interval::Full => 0.5,
            Interval::Half => 1.0,
        };
        self.weights.iter().map(|w| s * w).collect()
    }

    fn expect(&self, expected: Interval) -> Result<(), QuadratureError> {
        if self.interval == expected {
            Ok(())
        } else {
            Err(QuadratureError::IntervalMismatch { expected, actual: self.interval })
        }
    }
}

/// `½ Σ wᵢ f(μᵢ)` on a `[-1,1]` rule.
pub fn avg_full(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> Result<f64, QuadratureError> {
    rule.expect(Interval::Full)?;
    Ok(0.5 * rule.integrate(f))
}

/// `Σ wᵢ f(μᵢ)` on a `[0,1]` rule.
pub fn avg_half(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> Result<f64, QuadratureError> {
    rule.expect(Interval::Half)?;
    Ok(rule.integrate(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let r = gauss_legendre(2, Interval::Full).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes()[0] + s).abs() < 1e-15 && (r.nodes()[1] - s).abs() < 1e-15);
        assert!((r.weights()[0] - 1.0).abs() < 1e-15 && (r.weights()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss_legendre(1, Interval::Full).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert!((r.weights()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sixteen_points_integrate_mu30() {
        let r = gauss_legendre(16, Interval::Full).unwrap();
        assert!((r.integrate(|m| m.powi(30)) - 2.0 / 31.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_counts() {
        assert_eq!(gauss_legendre(0, Interval::Full), Err(QuadratureError::PointCount(0)));
        assert_eq!(gauss_legendre(65, Interval::Half), Err(QuadratureError::PointCount(65)));
    }

    #[test]
    fn nodes_are_refined_roots() {
        for n in [3, 16, 33, 64] {
            let r = gauss_legendre(n, Interval::Full).unwrap();
            for &x in r.nodes() {
                // residual is bounded by one ulp of x times the slope
                let (p, dp) = legendre_with_derivative(n, x);
                let bound = if n <= 16 { 1e-14 } else { 1e-14 * dp.abs().max(1.0) };
                assert!(p.abs() <= bound, "n={n} x={x} p={p}");
            }
            let sum: f64 = r.weights().iter().sum();
            assert!((sum - 2.0).abs() < 1e-13);
            assert!(r.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn full_average_brackets() {
        let r = gauss_legendre(16, Interval::Full).unwrap();
        assert!((avg_full(|_| 1.0, &r).unwrap() - 1.0).abs() < 1e-14);
        assert!(avg_full(|m| m, &r).unwrap().abs() < 1e-15);
        assert!((avg_full(|m| m * m, &r).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn half_average_brackets() {
        let r = gauss_legendre(16, Interval::Half).unwrap();
        assert!((avg_half(|_| 1.0, &r).unwrap() - 1.0).abs() < 1e-14);
        assert!((avg_half(|m| m, &r).unwrap() - 0.5).abs() < 1e-14);
        assert!((avg_half(|m| m * m, &r).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bracket_interval_mismatch() {
        let full = gauss_legendre(4, Interval::Full).unwrap();
        let half = gauss_legendre(4, Interval::Half).unwrap();
        assert!(avg_half(|m| m, &full).is_err());
        assert!(avg_full(|m| m, &half).is_err());
    }

    #[test]
    fn symmetric_pairs_are_exact() {
        for n in 1..=20 {
            let r = gauss_legendre(n, Interval::Full).unwrap();
            for i in 0..n {
                assert_eq!(r.nodes()[i], -r.nodes()[n - 1 - i]);
                assert_eq!(r.weights()[i], r.weights()[n - 1 - i]);
            }
        }
    }
}
