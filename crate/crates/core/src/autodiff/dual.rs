//! Forward-mode second-order Taylor numbers.
//!
//! [`DualScalar`] carries a value with first and second derivatives along a
//! single input direction. [`Jet`] carries first derivatives along the `t`
//! and `x` directions plus the second derivative along `x`; mixed partials
//! are not tracked.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use super::unary::Unary;

/// Scalar types a network forward pass can be generic over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn apply(self, op: Unary) -> Self;

    fn gelu(self) -> Self {
        self.apply(Unary::Gelu)
    }
    fn softplus(self) -> Self {
        self.apply(Unary::Softplus)
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn apply(self, op: Unary) -> Self {
        op.value(self)
    }
}

/// Value with first (`d1`) and second (`d2`) directional derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualScalar {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl DualScalar {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    /// The independent variable itself: `d1 = 1`, `d2 = 0`.
    pub const fn variable(value: f64) -> Self {
        Self { value, d1: 1.0, d2: 0.0 }
    }

    pub const fn constant(value: f64) -> Self {
        Self { value, d1: 0.0, d2: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }

    pub fn exp(self) -> Self {
        self.apply(Unary::Exp)
    }
    pub fn ln(self) -> Self {
        self.apply(Unary::Ln)
    }
    pub fn sin(self) -> Self {
        self.apply(Unary::Sin)
    }
    pub fn cos(self) -> Self {
        self.apply(Unary::Cos)
    }
    pub fn tanh(self) -> Self {
        self.apply(Unary::Tanh)
    }
    pub fn relu(self) -> Self {
        self.apply(Unary::Relu)
    }
    pub fn powi(self, n: i32) -> Self {
        self.apply(Unary::Powi(n))
    }
    pub fn powf(self, a: f64) -> Self {
        self.apply(Unary::Powf(a))
    }
    pub fn sqrt(self) -> Self {
        self.apply(Unary::Sqrt)
    }
}

impl Scalar for DualScalar {
    fn constant(v: f64) -> Self {
        DualScalar::constant(v)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn apply(self, op: Unary) -> Self {
        let d = op.derivs(self.value);
        Self {
            value: d.f0,
            d1: d.f1 * self.d1,
            d2: d.f2 * self.d1 * self.d1 + d.f1 * self.d2,
        }
    }
}

impl Add for DualScalar {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Add<f64> for DualScalar {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self::new(self.value + o, self.d1, self.d2)
    }
}

impl AddAssign for DualScalar {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for DualScalar {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Neg for DualScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2)
    }
}

impl Mul for DualScalar {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )
    }
}

impl Mul<f64> for DualScalar {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.value * k, self.d1 * k, self.d2 * k)
    }
}

impl Div for DualScalar {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.apply(Unary::Recip)
    }
}

/// Channel of a [`Jet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Value,
    Dt,
    Dx,
    Dxx,
}

/// Value, `∂t`, `∂x` and `∂²x` of a field at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub dt: f64,
    pub dx: f64,
    pub dxx: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet { v: 0.0, dt: 0.0, dx: 0.0, dxx: 0.0 };

    pub const fn new(v: f64, dt: f64, dx: f64, dxx: f64) -> Self {
        Self { v, dt, dx, dxx }
    }

    pub const fn constant(v: f64) -> Self {
        Self { v, dt: 0.0, dx: 0.0, dxx: 0.0 }
    }

    pub fn get(&self, ch: Channel) -> f64 {
        match ch {
            Channel::Value => self.v,
            Channel::Dt => self.dt,
            Channel::Dx => self.dx,
            Channel::Dxx => self.dxx,
        }
    }

    pub fn get_mut(&mut self, ch: Channel) -> &mut f64 {
        match ch {
            Channel::Value => &mut self.v,
            Channel::Dt => &mut self.dt,
            Channel::Dx => &mut self.dx,
            Channel::Dxx => &mut self.dxx,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.dt.is_finite() && self.dx.is_finite() && self.dxx.is_finite()
    }
}

impl Scalar for Jet {
    fn constant(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn apply(self, op: Unary) -> Self {
        let d = op.derivs(self.v);
        Jet {
            v: d.f0,
            dt: d.f1 * self.dt,
            dx: d.f1 * self.dx,
            dxx: d.f2 * self.dx * self.dx + d.f1 * self.dxx,
        }
    }
}

impl Add for Jet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet::new(self.v + o.v, self.dt + o.dt, self.dx + o.dx, self.dxx + o.dxx)
    }
}

impl Add<f64> for Jet {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Jet { v: self.v + o, ..self }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Jet {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Jet::new(self.v - o.v, self.dt - o.dt, self.dx - o.dx, self.dxx - o.dxx)
    }
}

impl Neg for Jet {
    type Output = Self;
    fn neg(self) -> Self {
        Jet::new(-self.v, -self.dt, -self.dx, -self.dxx)
    }
}

impl Mul for Jet {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Jet {
            v: self.v * o.v,
            dt: self.dt * o.v + self.v * o.dt,
            dx: self.dx * o.v + self.v * o.dx,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Jet::new(self.v * k, self.dt * k, self.dx * k, self.dxx * k)
    }
}

impl Div for Jet {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.apply(Unary::Recip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_matches_truncated_taylor() {
        let a = DualScalar::new(2.0, 0.5, -1.0);
        let b = DualScalar::new(-3.0, 1.5, 0.25);
        let p = a * b;
        assert_eq!(p.value, -6.0);
        assert_eq!(p.d1, 0.5 * -3.0 + 2.0 * 1.5);
        assert_eq!(p.d2, -1.0 * -3.0 + 2.0 * 0.5 * 1.5 + 2.0 * 0.25);
    }

    #[test]
    fn constants_have_no_derivatives() {
        let c = DualScalar::constant(4.0);
        assert_eq!((c.d1, c.d2), (0.0, 0.0));
        let j = Jet::constant(4.0);
        assert_eq!((j.dt, j.dx, j.dxx), (0.0, 0.0, 0.0));
    }

    #[test]
    fn jet_and_dual_agree_along_x() {
        let x = 0.37;
        let f_dual = |u: DualScalar| (u * u).sin() * u.exp() + u.tanh();
        let d = f_dual(DualScalar::variable(x));
        let u = Jet::new(x, 0.0, 1.0, 0.0);
        let j = (u * u).apply(Unary::Sin) * u.apply(Unary::Exp) + u.apply(Unary::Tanh);
        assert!((d.value - j.v).abs() < 1e-15);
        assert!((d.d1 - j.dx).abs() < 1e-14);
        assert!((d.d2 - j.dxx).abs() < 1e-13);
        assert_eq!(j.dt, 0.0);
    }

    #[test]
    fn division_uses_quotient_rule() {
        let x = DualScalar::variable(2.0);
        let q = DualScalar::constant(1.0) / x;
        assert!((q.value - 0.5).abs() < 1e-15);
        assert!((q.d1 + 0.25).abs() < 1e-15);
        assert!((q.d2 - 0.25).abs() < 1e-15);
    }
}
