//! Distance-covariance dependence measurement for categorical data.
//!
//! The crate covers four layers:
//!
//! - [`table`]: contingency tables, joint pmfs, paired samples, and their
//!   CSV/JSON ingestion.
//! - [`estimators`] and [`influence`]: the dependence functionals, their
//!   plug-in and unbiased estimators, and influence-function analysis.
//! - [`nulldist`] and [`hyptest`]: approximate null distributions and the
//!   end-to-end independence tests built on them.
//! - [`screening`] and [`simlab`]: high-dimensional marginal feature
//!   screening with automatic thresholding, and a seeded simulation engine
//!   for calibration and power studies.
//!
//! All stochastic entry points take a caller-owned generator or a master
//! seed; identical seeds give identical results regardless of worker count.

pub mod error;
pub mod estimators;
pub mod hyptest;
pub mod influence;
pub mod nulldist;
pub mod screening;
pub mod simlab;
pub mod stream;
pub mod table;

pub use error::{Error, Result};
pub use table::{ContingencyTable, JointPMF, PairedSample};
