//! Open-set recognition with class centers pinned to the vertices of a
//! radius-scaled regular simplex.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`simplex`]: construction and queries of the fixed class centers,
//! - [`losses`]: intra-class pull, background triplet hinge and the
//!   uncertainty-ratio penalty, each with analytic feature gradients,
//! - [`network`]: a small ReLU feature extractor with manual backprop,
//!   RMSProp with l1/l2 penalties, and the training loop,
//! - [`data`]: seeded synthetic datasets, background noise and the
//!   known/unknown trial protocol,
//! - [`eval`]: scoring, closed-set accuracy, ROC/AUROC and OSCR.
//!
//! File formats and the command-line driver live in the `ucdsc` crate.
#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod matrix;
pub mod network;
pub mod simplex;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use simplex::SimplexCenters;
