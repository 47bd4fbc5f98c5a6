//! Sequential control charts for detecting an increase in the variance of a
//! Gaussian time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`process`] describes the in-control target process, simulates observed
//!   paths with a scale change at an unknown time, and computes one-step
//!   predictors with their mean-square errors.
//! * [`charts`] holds the nine control statistics as incremental update rules.
//! * [`runlength`] runs a chart to its first alarm and estimates average run
//!   lengths and conditional average delays.
//! * [`calibrate`] finds the control limit that gives a target in-control ARL.
//! * [`experiments`] orchestrates grids of calibrations and estimates.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod charts;
mod error;
pub mod experiments;
pub mod process;
pub mod runlength;

pub use calibrate::{calibrate_limit, CalibrationResult, CalibrationTarget};
pub use charts::{Chart, ChartConfig, Scheme};
pub use error::{CalibrationError, Error, Result};
pub use process::{ChangeSpec, PathGenerator, ProcessKind, ProcessSpec};
pub use runlength::{estimate_arl, estimate_delay, ArlEstimate, DelayEstimate, MonteCarlo, RunLength};
