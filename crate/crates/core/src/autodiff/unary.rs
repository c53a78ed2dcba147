//! Elementary scalar functions with derivatives up to third order.
//!
//! Third derivatives are needed because reverse mode over a second-order
//! Taylor jet differentiates the second-order coefficient once more.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Overflow threshold for the softplus branch.
const SOFTPLUS_LINEAR_ABOVE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unary {
    Neg,
    Scale(f64),
    Shift(f64),
    Recip,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Gelu,
    Softplus,
    Relu,
    Powi(i32),
    Powf(f64),
    Sqrt,
}

/// Function value and first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// Standard normal density.
#[inline]
fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, erf based.
#[inline]
fn big_phi(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exact (erf form) GELU and its first three derivatives.
#[inline]
pub fn gelu_derivs(x: f64) -> Derivs {
    let p = phi(x);
    let cdf = big_phi(x);
    Derivs {
        f0: x * cdf,
        f1: cdf + x * p,
        f2: p * (2.0 - x * x),
        f3: p * (x * x * x - 4.0 * x),
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_LINEAR_ABOVE {
        x + (-x).exp()
    } else {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }
}

#[inline]
pub fn softplus_derivs(x: f64) -> Derivs {
    let s = sigmoid(x);
    let s1 = s * (1.0 - s);
    Derivs {
        f0: softplus(x),
        f1: s,
        f2: s1,
        f3: s1 * (1.0 - 2.0 * s),
    }
}

impl Unary {
    /// Evaluates the function and its derivatives at `x`.
    ///
    /// Out-of-domain arguments (e.g. `Ln` at a non-positive value)
    /// produce non-finite entries; callers report them as domain errors.
    pub fn derivs(self, x: f64) -> Derivs {
        match self {
            Unary::Neg => Derivs { f0: -x, f1: -1.0, f2: 0.0, f3: 0.0 },
            Unary::Scale(k) => Derivs { f0: k * x, f1: k, f2: 0.0, f3: 0.0 },
            Unary::Shift(k) => Derivs { f0: x + k, f1: 1.0, f2: 0.0, f3: 0.0 },
            Unary::Recip => {
                let r = 1.0 / x;
                Derivs { f0: r, f1: -r * r, f2: 2.0 * r * r * r, f3: -6.0 * r * r * r * r }
            }
            Unary::Exp => {
                let e = x.exp();
                Derivs { f0: e, f1: e, f2: e, f3: e }
            }
            Unary::Ln => {
                if x <= 0.0 {
                    return Derivs { f0: f64::NAN, f1: f64::NAN, f2: f64::NAN, f3: f64::NAN };
                }
                let r = 1.0 / x;
                Derivs { f0: x.ln(), f1: r, f2: -r * r, f3: 2.0 * r * r * r }
            }
            Unary::Sin => {
                let (s, c) = x.sin_cos();
                Derivs { f0: s, f1: c, f2: -s, f3: -c }
            }
            Unary::Cos => {
                let (s, c) = x.sin_cos();
                Derivs { f0: c, f1: -s, f2: -c, f3: s }
            }
            Unary::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                Derivs { f0: t, f1: d, f2: -2.0 * t * d, f3: d * (6.0 * t * t - 2.0) }
            }
            Unary::Gelu => gelu_derivs(x),
            Unary::Softplus => softplus_derivs(x),
            Unary::Relu => {
                if x > 0.0 {
                    Derivs { f0: x, f1: 1.0, f2: 0.0, f3: 0.0 }
                } else {
                    Derivs { f0: 0.0, f1: 0.0, f2: 0.0, f3: 0.0 }
                }
            }
            Unary::Powi(n) => {
                let nf = n as f64;
                let p = |k: i32| if n - k == 0 { 1.0 } else { x.powi(n - k) };
                Derivs {
                    f0: p(0),
                    f1: if n == 0 { 0.0 } else { nf * p(1) },
                    f2: if n == 0 || n == 1 { 0.0 } else { nf * (nf - 1.0) * p(2) },
                    f3: if (0..=2).contains(&n) { 0.0 } else { nf * (nf - 1.0) * (nf - 2.0) * p(3) },
                }
            }
            Unary::Powf(a) => {
                if x < 0.0 {
                    return Derivs { f0: f64::NAN, f1: f64::NAN, f2: f64::NAN, f3: f64::NAN };
                }
                Derivs {
                    f0: x.powf(a),
                    f1: a * x.powf(a - 1.0),
                    f2: a * (a - 1.0) * x.powf(a - 2.0),
                    f3: a * (a - 1.0) * (a - 2.0) * x.powf(a - 3.0),
                }
            }
            Unary::Sqrt => Unary::Powf(0.5).derivs(x),
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Unary::Neg => -x,
            Unary::Scale(k) => k * x,
            Unary::Shift(k) => x + k,
            Unary::Recip => 1.0 / x,
            Unary::Exp => x.exp(),
            Unary::Ln => {
                if x <= 0.0 {
                    f64::NAN
                } else {
                    x.ln()
                }
            }
            Unary::Sin => x.sin(),
            Unary::Cos => x.cos(),
            Unary::Tanh => x.tanh(),
            Unary::Gelu => x * big_phi(x),
            Unary::Softplus => softplus(x),
            Unary::Relu => x.max(0.0),
            Unary::Powi(n) => x.powi(n),
            Unary::Powf(a) => {
                if x < 0.0 {
                    f64::NAN
                } else {
                    x.powf(a)
                }
            }
            Unary::Sqrt => {
                if x < 0.0 {
                    f64::NAN
                } else {
                    x.sqrt()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivative_chain_matches_finite_differences() {
        let ops = [
            Unary::Recip,
            Unary::Exp,
            Unary::Ln,
            Unary::Sin,
            Unary::Cos,
            Unary::Tanh,
            Unary::Gelu,
            Unary::Softplus,
            Unary::Powi(4),
            Unary::Powf(2.5),
            Unary::Sqrt,
        ];
        for op in ops {
            for &x in &[0.3, 0.77, 1.9] {
                let d = op.derivs(x);
                let h = 1e-5;
                let fd1 = central(|y| op.derivs(y).f0, x, h);
                let fd2 = central(|y| op.derivs(y).f1, x, h);
                let fd3 = central(|y| op.derivs(y).f2, x, h);
                assert!((d.f1 - fd1).abs() < 1e-7 * (1.0 + d.f1.abs()), "{op:?} f1 at {x}");
                assert!((d.f2 - fd2).abs() < 1e-7 * (1.0 + d.f2.abs()), "{op:?} f2 at {x}");
                assert!((d.f3 - fd3).abs() < 1e-6 * (1.0 + d.f3.abs()), "{op:?} f3 at {x}");
                assert_eq!(d.f0, op.value(x), "{op:?} value path at {x}");
            }
        }
    }

    #[test]
    fn softplus_is_overflow_safe() {
        assert!(softplus(1000.0).is_finite());
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        // continuity across the linear branch
        assert!((softplus(30.0) - softplus(30.0 + 1e-12)).abs() < 1e-10);
    }

    #[test]
    fn gelu_matches_erf_form() {
        for &x in &[-3.0, -0.5, 0.0, 0.5, 2.0] {
            let expected = 0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt()));
            assert!((gelu_derivs(x).f0 - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_outside_domain_is_nan() {
        assert!(Unary::Ln.derivs(0.0).f0.is_nan());
        assert!(Unary::Ln.value(-1.0).is_nan());
    }
}
