//! Run configuration, training runs on disk, evaluation against reference
//! grids, plots and tables.

mod config;
mod eval;
mod plot;
mod report;
mod run;
mod selftest;

pub use config::{NetworkConfig, RoleShape, RunConfig};
pub use eval::{
    evaluate_run, EvalPlan, Evaluation, ErrorReport, ErrorRow, FieldSource, NetModel, Profile, T_E_POSITION,
};
pub use plot::profile_svg;
pub use report::report_table;
pub use run::{load_nets, run_training, save_nets, RunSummary, CONFIG_FILE, TRACE_FILE};
pub use selftest::{run_selftest, SelfCheck};

use thiserror::Error;

use crate::losses::{LossError, Method};
use crate::network::{CheckpointError, NetworkError};
use crate::reference::ReferenceError;
use crate::training::TrainError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("reference values are identically zero")]
    ZeroDenominator,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("malformed error report: {0}")]
    Report(String),
    #[error("{0} self-check(s) failed")]
    SelfTest(usize),
}

impl HarnessError {
    /// 2 for numerical aborts, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Train(TrainError::NonFinite { .. }) | HarnessError::NonFinite(_) | HarnessError::SelfTest(_) => 2,
            HarnessError::Reference(
                ReferenceError::NewtonFailed { .. } | ReferenceError::Singular { .. } | ReferenceError::Negative { .. },
            ) => 2,
            _ => 1,
        }
    }
}

/// `√(Σ(aᵢ − bᵢ)² / Σbᵢ²)`.
pub fn relative_l2(values: &[f64], reference: &[f64]) -> Result<f64, HarnessError> {
    if values.len() != reference.len() {
        return Err(HarnessError::LengthMismatch(values.len(), reference.len()));
    }
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if den == 0.0 || values.is_empty() {
        return Err(HarnessError::ZeroDenominator);
    }
    let num: f64 = values.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((num / den).sqrt())
}

/// Display name used in reports: `pinn`, `apnn-mm`, `apnn-eo`.
pub fn method_label(m: Method) -> &'static str {
    match m {
        Method::Pinn => "pinn",
        Method::Mm => "apnn-mm",
        Method::Eo => "apnn-eo",
    }
}

pub fn parse_method_label(s: &str) -> Option<Method> {
    [Method::Pinn, Method::Mm, Method::Eo].into_iter().find(|&m| method_label(m) == s || m.name() == s)
}
