//! Classical toolkit for judging whether fault-tolerant quantum PCA would pay
//! off for PCA-based network anomaly detection.
//!
//! The crate covers three concerns:
//!
//! * simulating the bounded errors of the quantum subroutines ([`qsim`],
//!   [`qpca`], [`qmeans`]) so that detectors ([`detectors`]) can be trained on
//!   models carrying realistic quantum error,
//! * measuring the dataset quantities that enter the quantum query-count
//!   formulas and locating where quantum counts drop below classical
//!   operation counts ([`advantage`]),
//! * a reproducible batch pipeline wiring it all together ([`pipeline`],
//!   [`config`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod config;
pub mod data;
pub mod detectors;
pub mod error;
pub mod linalg;
pub mod pca;
pub mod pipeline;
pub mod qmeans;
pub mod qpca;
pub mod qsim;
pub mod report;

pub use error::{Error, Result};
