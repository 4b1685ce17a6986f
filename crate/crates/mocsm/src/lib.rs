//! Multi-output Gaussian processes built around convolution spectral
//! mixture kernels.
//!
//! The crate provides:
//! - the MOCSM kernel and its baselines (SM, MOSM, CSM, SM-LMC, SE-LMC,
//!   Matérn-LMC) with the cross-convolution parameter algebra ([`kernels`]),
//! - exact GP inference: marginal likelihood, gradients, optimization, and
//!   posterior prediction over stacked multi-channel data ([`gp`]),
//! - spectral initialization from periodogram + Gaussian-mixture EM
//!   ([`init`]),
//! - synthetic data generation, CSV ingestion, and train/test split schemes
//!   ([`data`]),
//! - benchmark orchestration: MAE evaluation, kernel comparison tables, and
//!   cross-covariance curve export ([`harness`]).
//!
//! See the `examples/` directory for runnable entry points per capability,
//! and the `mocsm` binary for the command-line interface.

pub mod data;
pub mod error;
pub mod gp;
pub mod harness;
pub mod init;
pub mod kernels;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};
