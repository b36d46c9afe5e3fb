//! Rank-one response models and adaptive spectral estimation.
//!
//! Observations are two-valued `n x m` matrices whose expectation is the
//! rank-one product `u vᵀ` of item parameters `u` and worker parameters `v`.
//! The crate provides:
//!
//! - [`model`]: rank-one instances, the Z-channel and binary symmetric channel
//!   corruptions and reproducible sampling of observation matrices.
//! - [`spectral`]: the split-matrix matched-filter estimator of `u` with a
//!   uniform entrywise confidence half-width, its column-sum variant and the
//!   row-average baseline.
//! - [`topk`] and [`threshold`]: sequential-halving top-k identification and
//!   adaptive thresholding on top of the spectral estimator.
//! - [`minhash`]: k-mer min-hash sketches, so that read overlaps become a
//!   rank-one collision model.
//! - [`synthdata`] and [`eval`]: synthetic instances and the Monte-Carlo
//!   budget-curve harness.

#![forbid(unsafe_code)]

pub mod error;
pub mod estimator;
pub mod eval;
pub mod matrix;
pub mod minhash;
pub mod model;
pub mod sampler;
pub mod seed;
pub mod spectral;
pub mod synthdata;
pub mod threshold;
pub mod topk;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, MatrixView, ObservationMatrix};
pub use model::{ChannelKind, RankOneInstance};
