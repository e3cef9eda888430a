//! Post-processing for equalized odds and equal opportunity.
//!
//! Given the joint statistics of a predictor or score, a protected
//! attribute and the target, this crate derives loss-optimal predictors
//! that satisfy the criteria, audits existing predictors, and reproduces
//! the two-scenario identifiability experiment and a credit-score case
//! study.

pub mod audit;
pub mod casestudy;
pub mod error;
pub mod geometry;
pub mod joint;
pub mod postprocess;
pub mod scenarios;

pub use error::{Error, Result};
pub use geometry::{RatePoint, ThresholdRule};
pub use postprocess::Criterion;
pub use joint::{
    ConditionalScoreDistribution, JointBinaryDistribution, LossSpec,
};
