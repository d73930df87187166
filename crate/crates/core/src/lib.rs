//! Simulation and per-gene analysis of case-control expression differences in
//! nested case-control designs.
//!
//! * [`data`]: pairs, expression matrices, exposure encoding, alignment.
//! * [`simulate`]: cohort, risk-set matching and gene expression generator.
//! * [`trajectory`]: hinge, isotonic and interaction trajectory models.
//! * [`survival`]: conditional logistic comparators.
//! * [`multiplicity`]: BH / BY adjustment.

pub mod data;
pub mod error;
pub mod linalg;
pub mod multiplicity;
pub mod pca;
pub mod results;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod survival;
pub mod trajectory;

pub use error::{Error, Result};
