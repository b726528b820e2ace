//! Deep regression cascade for 2D landmark localization.
//!
//! A global linear regressor predicts an initial landmark configuration from
//! a whole-image HOG descriptor; a stack of local regressors then refines the
//! estimate using histogram descriptors sampled around the current landmarks.
//! The stack can be trained sequentially (each stage fit against the residual
//! of the frozen stages before it) or jointly, by back-propagating the final
//! squared error through every stage with numerically differentiated
//! descriptors, dropout on the feature inputs, and SGD with momentum.
//!
//! The crate also ships dataset loading (`pts`-style annotations plus common
//! raster formats), a synthetic blob-landmark dataset generator for
//! benchmarking, per-stage error diagnostics, and a versioned binary model
//! format.

pub mod cascade;
pub mod data;
pub mod error;
pub mod features;
pub mod image;
pub mod parallel;
pub mod shapes;
pub mod training;

pub use error::{Error, Result};
