//! Residual networks and the output wrappers used for the unknown fields.

mod batch;
mod checkpoint;
mod gemm;
mod resnet;

pub use batch::{BatchTrace, Directions};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use resnet::{BlockLayout, Layout, ResNet, ShapeSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::softplus;
use crate::quadrature::{gauss_legendre, Interval, DEFAULT_POINTS};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("invalid network shape {0:?}")]
    InvalidShape(ShapeSpec),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("non-finite parameter")]
    NonFinite,
    #[error("expected input dimension {expected}, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("wrapper {0:?} needs an angular argument")]
    MissingAngle(WrapperKind),
}

/// How the raw network output is turned into the field value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrapperKind {
    Plain,
    Positive,
    EvenPositive,
    Odd,
    MeanZero,
}

impl WrapperKind {
    /// Whether the wrapper evaluates the raw net at more than the given angle.
    pub fn needs_angle(self) -> bool {
        matches!(self, WrapperKind::EvenPositive | WrapperKind::Odd | WrapperKind::MeanZero)
    }

    pub fn name(self) -> &'static str {
        match self {
            WrapperKind::Plain => "plain",
            WrapperKind::Positive => "positive",
            WrapperKind::EvenPositive => "even-positive",
            WrapperKind::Odd => "odd",
            WrapperKind::MeanZero => "mean-zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Plain, Self::Positive, Self::EvenPositive, Self::Odd, Self::MeanZero]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// Evaluates a wrapped network. The raw net sees `coords` followed by `mu`
/// when an angle is supplied.
pub fn wrap_eval(net: &ResNet, kind: WrapperKind, coords: &[f64], mu: Option<f64>) -> Result<f64, NetworkError> {
    let raw = |m: Option<f64>| -> Result<f64, NetworkError> {
        let mut x = coords.to_vec();
        x.extend(m);
        net.forward_scalar(&x)
    };
    if kind.needs_angle() && mu.is_none() {
        return Err(NetworkError::MissingAngle(kind));
    }
    Ok(match kind {
        WrapperKind::Plain => raw(mu)?,
        WrapperKind::Positive => softplus(raw(mu)?),
        WrapperKind::EvenPositive => {
            let m = mu.unwrap_or_default();
            softplus(raw(Some(m))? + raw(Some(-m))?)
        }
        WrapperKind::Odd => {
            let m = mu.unwrap_or_default();
            raw(Some(m))? - raw(Some(-m))?
        }
        WrapperKind::MeanZero => {
            let rule = gauss_legendre(DEFAULT_POINTS, Interval::Full).expect("default rule");
            let mut mean = 0.0;
            for (&mk, &wk) in rule.nodes().iter().zip(rule.weights()) {
                mean += 0.5 * wk * raw(Some(mk))?;
            }
            raw(mu)? - mean
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net3() -> ResNet {
        ResNet::init_xavier(ShapeSpec::new(3, 8, 2, 1), 3).unwrap()
    }

    #[test]
    fn odd_vanishes_at_zero_angle() {
        assert_eq!(wrap_eval(&net3(), WrapperKind::Odd, &[0.2, 0.4], Some(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn parity_wrappers_are_exact() {
        let net = net3();
        for &m in &[0.1, 0.55, 0.93] {
            let a = wrap_eval(&net, WrapperKind::EvenPositive, &[0.3, 0.7], Some(m)).unwrap();
            let b = wrap_eval(&net, WrapperKind::EvenPositive, &[0.3, 0.7], Some(-m)).unwrap();
            assert_eq!(a, b);
            assert!(a > 0.0);
            let a = wrap_eval(&net, WrapperKind::Odd, &[0.3, 0.7], Some(m)).unwrap();
            let b = wrap_eval(&net, WrapperKind::Odd, &[0.3, 0.7], Some(-m)).unwrap();
            assert_eq!(a + b, 0.0);
        }
    }

    #[test]
    fn mean_zero_has_zero_quadrature_average() {
        let net = net3();
        let rule = gauss_legendre(DEFAULT_POINTS, Interval::Full).unwrap();
        let avg = crate::quadrature::avg_full(
            |m| wrap_eval(&net, WrapperKind::MeanZero, &[0.1, 1.3], Some(m)).unwrap(),
            &rule,
        )
        .unwrap();
        assert!(avg.abs() < 1e-13);
    }

    #[test]
    fn missing_angle_is_an_error() {
        let net = ResNet::init_xavier(ShapeSpec::new(2, 4, 2, 1), 1).unwrap();
        assert_eq!(
            wrap_eval(&net, WrapperKind::Odd, &[0.1, 0.2], None),
            Err(NetworkError::MissingAngle(WrapperKind::Odd))
        );
        assert!(wrap_eval(&net, WrapperKind::Positive, &[0.1, 0.2], None).unwrap() > 0.0);
    }

    #[test]
    fn wrapper_names_round_trip() {
        for k in [WrapperKind::Plain, WrapperKind::Positive, WrapperKind::EvenPositive, WrapperKind::Odd, WrapperKind::MeanZero] {
            assert_eq!(WrapperKind::parse(k.name()), Some(k));
        }
    }
}
