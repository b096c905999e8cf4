//! Markov chain quasi-Monte Carlo discrepancy laboratory.
//!
//! Uniformly ergodic chains are run from deterministic driver sequences
//! through update functions; chain and push-back discrepancies are measured
//! against δ-covers and compared with closed-form bounds.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chains;
pub mod config;
pub mod covers;
pub mod csv;
pub mod discrepancy;
pub mod drivers;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod plot;
pub mod points;
pub mod quad;
pub mod rkhs;
pub mod special;
pub mod sphere;

pub use chains::{ChainModel, ChainPath, ErgodicityCertificate};
pub use covers::DeltaCover;
pub use discrepancy::DiscrepancyReport;
pub use drivers::{DriverSequence, Provenance};
pub use error::{Error, Result};
pub use measures::{Density1d, Support, TargetMeasure};
pub use points::{ExtReal, PointSet};
pub use sphere::{CapCover, SphericalCap};
