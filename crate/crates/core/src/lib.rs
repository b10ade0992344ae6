//! Curriculum training engine built around incremental label introduction
//! and adaptive target compensation.
//!
//! Training starts with a subset of the labels revealed; samples of hidden
//! labels are trained towards a shared pseudo-label and balanced against the
//! revealed ones. Labels are revealed in fixed increments until all are
//! known, after which conventional training resumes. From a threshold epoch
//! on, samples the previous epoch's model misclassified are trained towards
//! a smoothed target.

pub mod baselines;
pub mod compensation;
pub mod curriculum;
pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod harness;
pub mod nncore;

pub use error::{Error, Result};
