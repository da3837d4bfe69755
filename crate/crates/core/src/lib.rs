//! Spatial latent Gaussian models with a Matérn SPDE prior on triangular meshes,
//! fitted by empirical Bayes, plus calibration diagnostics and buffered spatial
//! leave-one-out cross-validation.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod linalg;
pub mod mesh;
pub mod stats;
pub mod formula;
pub mod optimize;
pub mod spde;
pub mod model;
pub mod diagnostics;
pub mod sloocv;
pub mod field;
