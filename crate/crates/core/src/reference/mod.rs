//! Grid-based reference solvers for the benchmark problems.
//!
//! The kinetic solver discretises the even/odd parity form of the transfer
//! equation with a half-range Gauss rule in angle, cell-centred even parts,
//! face-centred odd parts and backward Euler in time. Each step is a
//! Newton solve of a block-tridiagonal system, which keeps the scheme
//! stable and consistent uniformly in the Knudsen number.

mod diffusion;
mod grid;
mod kinetic;
mod linalg;

pub use diffusion::{solve_diffusion_limit, DiffusionConfig};
pub use grid::{read_reference_csv, sample_reference, write_reference_csv, GridSolution, Quantity, SolverMeta};
pub use kinetic::{solve_kinetic, solve_stationary, KineticConfig};
pub use linalg::{BlockTridiag, DenseLu};

use thiserror::Error;

use crate::physics::ProblemId;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("Newton failed to converge at step {step} (worst residual in cell {cell}, |F| = {residual:e})")]
    NewtonFailed { step: usize, cell: usize, residual: f64 },
    #[error("singular Jacobian at step {step}")]
    Singular { step: usize },
    #[error("solution became negative or non-finite ({value:e})")]
    Negative { value: f64 },
    #[error("point (t={t}, x={x}) lies outside the reference grid")]
    Extrapolation { t: f64, x: f64 },
    #[error("reference does not contain {0:?}")]
    MissingQuantity(Quantity),
    #[error("{problem:?} is not supported by this solver: {reason}")]
    Unsupported { problem: ProblemId, reason: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed reference file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
