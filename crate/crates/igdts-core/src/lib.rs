//! Robust regression with sorted soft-threshold outlier selection, and a
//! generative particle-filter tracker built on the same estimator.
//!
//! The crate has three layers:
//!
//! * **Estimation** — [`noise`] models the dense-Gaussian-plus-sparse-
//!   Laplacian error, [`slope`] provides the sorted-ℓ1 penalty and threshold
//!   rules, and [`regression`] solves the penalized least-squares problem by
//!   iterative gradient descent with threshold selection, exposing the OLS /
//!   LAD / soft-threshold / sorted-threshold template distances.
//! * **Tracking** — [`subspace`] maintains an incrementally updated PCA
//!   appearance model whose distance discounts sparse outliers (occlusions),
//!   and [`tracker`] runs the affine-state bootstrap particle filter on top
//!   of it.
//! * **Harness** — [`imaging`] loads image sequences and warps observation
//!   patches, [`metrics`] scores tracks against ground truth, and [`synth`]
//!   generates reproducible regression datasets and image sequences for
//!   end-to-end verification.

pub mod error;
pub mod imaging;
pub mod metrics;
pub mod noise;
pub mod quad;
pub mod regression;
pub mod slope;
pub mod subspace;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
