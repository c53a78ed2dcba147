//! Asymptotic-preserving neural network losses for the 1D gray radiative
//! transfer equations, with PINN baselines, deterministic reference
//! solvers and a training/evaluation harness.

pub mod autodiff;
pub mod harness;
pub mod losses;
pub mod network;
pub mod physics;
pub mod quadrature;
pub mod reference;
pub mod training;
