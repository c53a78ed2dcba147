//! Reverse over nested forward-mode automatic differentiation.
//!
//! Input derivatives (`∂t`, `∂x`, `∂²x`) are carried forward as truncated
//! Taylor jets; parameter gradients of expressions built from those jets
//! come from a single reverse sweep over a [`Tape`].

mod dual;
mod tape;
mod unary;

pub use dual::{Channel, DualScalar, Jet, Scalar};
pub use tape::{Adjoints, GradVector, Tape, Var};
pub use unary::{gelu_derivs, softplus, softplus_derivs, Derivs, Unary};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AdError {
    #[error("primitive evaluated outside its domain (non-finite result)")]
    Domain,
    #[error("output node does not belong to this tape")]
    ForeignNode,
    #[error("direction index {dir} out of range for input of dimension {dim}")]
    BadDirection { dir: usize, dim: usize },
}

/// Evaluates `f` at `x` with first and second derivatives along the
/// coordinate direction `dir`.
pub fn eval_with_input_derivs<F>(f: F, x: &[f64], dir: usize) -> Result<DualScalar, AdError>
where
    F: Fn(&[DualScalar]) -> DualScalar,
{
    if dir >= x.len() {
        return Err(AdError::BadDirection { dir, dim: x.len() });
    }
    let seeded: Vec<DualScalar> = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| if i == dir { DualScalar::variable(xi) } else { DualScalar::constant(xi) })
        .collect();
    let out = f(&seeded);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(AdError::Domain)
    }
}

/// Analytic parameter gradient of a recorded expression together with its
/// central-difference counterpart.
#[derive(Debug, Clone)]
pub struct GradientComparison {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradientComparison {
    /// `max_k |a_k - n_k| / (|a_k| + floor)`.
    pub fn max_relative_error(&self, floor: f64) -> f64 {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .map(|(a, n)| (a - n).abs() / (a.abs() + floor))
            .fold(0.0, f64::max)
    }

    /// Same as [`max_relative_error`](Self::max_relative_error) with the
    /// floor scaled by the largest analytic component.
    pub fn max_scaled_error(&self, rel_floor: f64) -> f64 {
        let scale = self.analytic.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        self.max_relative_error(rel_floor * scale + 1e-300)
    }
}

/// Records `f` with parameters `theta`, differentiates it in reverse mode
/// and compares against central differences of step `h`.
pub fn compare_gradient<F>(f: F, theta: &[f64], h: f64) -> Result<GradientComparison, AdError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let eval = |th: &[f64]| {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = th.iter().enumerate().map(|(i, &v)| tape.param(i, v)).collect();
        f(&tape, &vars).value()
    };
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = theta.iter().enumerate().map(|(i, &v)| tape.param(i, v)).collect();
    let out = f(&tape, &vars);
    let grads = tape.backward(out)?;
    let analytic: Vec<f64> = (0..theta.len()).map(|i| grads.param(i)).collect();
    let mut th = theta.to_vec();
    let mut numeric = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = th[i];
        th[i] = orig + h;
        let fp = eval(&th);
        th[i] = orig - h;
        let fm = eval(&th);
        th[i] = orig;
        numeric.push((fp - fm) / (2.0 * h));
    }
    Ok(GradientComparison { analytic, numeric })
}

/// Max over components of `|analytic − central-difference| / (|analytic| + 1e-12)`.
pub fn check_gradient<F>(f: F, theta: &[f64], h: f64) -> Result<f64, AdError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    Ok(compare_gradient(f, theta, h)?.max_relative_error(1e-12))
}
