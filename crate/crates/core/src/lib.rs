//! Bounding-box guided Tanh-polar warping for face parsing.
//!
//! The crate is `no_std` (with `alloc`) and contains only compute:
//!
//! - [`geometry`]: ellipse fitting and the Cartesian / Tanh-polar /
//!   Tanh-Cartesian coordinate maps with their inverses.
//! - [`warp`]: sampling grids, bilinear resampling, image warping and the
//!   inverse transform of score maps back to the original resolution.
//! - [`nn`]: a small NCHW convolution engine with mixed (wrap rows /
//!   replicate columns) padding, the hybrid residual block and an FCN head.
//! - [`metrics`]: cross-entropy and Dice losses, confusion matrices and
//!   per-class IoU / F1.
//!
//! File formats and the command line live in the `tanhpolar-cli` crate.
#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

mod error;
pub mod geometry;
pub mod mask;
pub(crate) mod math;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod warp;

pub use error::{Error, Result};
pub use geometry::{BBox, Ellipse, PolarCoord, TCCoord};
pub use mask::LabelMask;
pub use tensor::Tensor;
