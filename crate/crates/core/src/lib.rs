//! Surrogate-modeling toolkit for sub-sea pressure vessel stress prediction.
//!
//! The expensive step in cylindrical pressure hull design is evaluating the
//! maximum von Mises stress of a candidate geometry under external hydrostatic
//! pressure. This crate replaces that evaluation with a trained regressor:
//!
//! * [`physics`] — closed-form Lamé shell-stress oracle used as the ground
//!   truth generator (thick-walled cylinder + hemispherical end caps).
//! * [`dataset`] — design-space sampling, normalization, splitting, and CSV
//!   persistence.
//! * [`mlp`] — a from-scratch multilayer perceptron with residual skips,
//!   dropout, L1 loss, hand-derived backpropagation, and Adam.
//! * [`ensemble`] — k-fold cross-validated deep ensemble whose prediction is
//!   the mean of its members.
//! * [`trees`] — CART, random forest, and gradient boosting baselines.
//! * [`metrics`] — the four-statistic evaluation report (accuracy, mean
//!   absolute residual, outlier count, error deviation).
//! * [`cli`] — the `gen-data` / `train` / `benchmark` / `predict` / `eval`
//!   commands behind the `vessel-surrogate` binary.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod mlp;
pub mod physics;
pub mod seeds;
pub mod trees;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
