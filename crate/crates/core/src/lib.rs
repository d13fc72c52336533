//! Robust low-rank compression of mixed-sign matrices.
//!
//! The main entry point is [`solver::fit`], which factors `X ≈ WH` with `H ≥ 0`
//! under a column-wise L2,1 loss plus a ridge penalty on `W`. Frobenius semi-NMF
//! and PCA baselines live in [`baselines`]; [`harness`] drives the experiments
//! behind the `l21snf` binary.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod init;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, DiagWeights};
pub use rng::Rng;
pub use solver::{fit, FactorizationState, FitReport, SolverConfig, UpdateOrder, Weighting};
