//! Rotated boxes modeled as Gaussian distributions.
//!
//! The crate converts 2-D and 3-D rotated boxes to Gaussians, measures them
//! with Wasserstein, Kullback-Leibler and Bhattacharyya style distances, turns
//! those into bounded regression losses with analytic gradients, and ships the
//! exact SkewIoU geometry used to check them. Gaussian-metric label assignment
//! and 3-D heading disambiguation sit on top.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod assign;
pub mod cli;
pub mod box_model;
pub mod divergence;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod gradient;
pub mod heading;
pub mod linalg;
pub mod loss;
pub mod report;
pub mod selftest;
pub mod sweep;

pub use error::{Error, Result};
