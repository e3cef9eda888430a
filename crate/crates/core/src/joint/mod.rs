//! Joint statistics of (predictor or score, protected attribute, outcome).
//!
//! Everything downstream consumes one of two summaries: a
//! [`JointBinaryDistribution`] for a binary predictor, or a
//! [`ConditionalScoreDistribution`] holding the per-group, per-outcome
//! score distributions of a real-valued score. Both are estimated from
//! weighted samples and are immutable afterwards.

mod binary;
mod ingest;
mod score;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binary::{estimate_binary_joint, BinarySample, JointBinaryDistribution};
pub use ingest::{read_samples, read_samples_path, SampleTable};
pub(crate) use score::estimate_score_distribution_named;
pub use score::{
    estimate_score_distribution, ConditionalScoreDistribution, EmpiricalDistribution, ScoreSample,
};

/// Tolerance on probability tables summing to one.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A protected group: a contiguous index plus a display name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupLabel {
    pub id: usize,
    pub name: String,
}

/// False and true positive rate of a predictor within one group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePoint {
    pub fpr: f64,
    pub tpr: f64,
}

impl RatePoint {
    pub const ORIGIN: RatePoint = RatePoint { fpr: 0.0, tpr: 0.0 };
    pub const ONE: RatePoint = RatePoint { fpr: 1.0, tpr: 1.0 };

    pub const fn new(fpr: f64, tpr: f64) -> Self {
        Self { fpr, tpr }
    }

    /// Rates of the complementary predictor `1 - Ŷ`.
    pub fn complement(self) -> Self {
        Self::new(1.0 - self.fpr, 1.0 - self.tpr)
    }

    pub fn lerp(self, other: Self, weight: f64) -> Self {
        Self::new(
            self.fpr + weight * (other.fpr - self.fpr),
            self.tpr + weight * (other.tpr - self.tpr),
        )
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.fpr - other.fpr).hypot(self.tpr - other.tpr)
    }
}

/// Costs of the two error types; correct decisions cost nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    /// Loss of predicting 1 when the outcome is 0.
    pub cost_fp: f64,
    /// Loss of predicting 0 when the outcome is 1.
    pub cost_fn: f64,
}

impl LossSpec {
    pub fn new(cost_fp: f64, cost_fn: f64) -> Result<Self> {
        if !(cost_fp.is_finite() && cost_fn.is_finite()) || cost_fp < 0.0 || cost_fn < 0.0 {
            return Err(Error::invalid(format!(
                "loss costs must be finite and non-negative, got ({cost_fp}, {cost_fn})"
            )));
        }
        if cost_fp == 0.0 && cost_fn == 0.0 {
            return Err(Error::DegenerateLoss);
        }
        Ok(Self { cost_fp, cost_fn })
    }

    /// Loss for a lender who profits on applicants whose probability of the
    /// positive outcome exceeds `break_even`.
    pub fn from_break_even(break_even: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&break_even) {
            return Err(Error::invalid(format!("break-even rate {break_even} outside [0, 1]")));
        }
        Self::new(break_even, 1.0 - break_even)
    }

    /// The probability of `Y = 1` above which predicting 1 is cheaper.
    pub fn break_even(&self) -> f64 {
        self.cost_fp / (self.cost_fp + self.cost_fn)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.cost_fp * factor, self.cost_fn * factor)
    }

    /// Expected loss contributed by a group with joint masses
    /// `Pr{A=a, Y=0}` and `Pr{A=a, Y=1}` operating at `rates`.
    pub fn group_loss(&self, negative_mass: f64, positive_mass: f64, rates: RatePoint) -> f64 {
        self.cost_fp * negative_mass * rates.fpr + self.cost_fn * positive_mass * (1.0 - rates.tpr)
    }
}

pub(crate) fn check_weight(weight: f64) -> Result<()> {
    if weight.is_nan() || weight < 0.0 {
        return Err(Error::NegativeWeight(weight));
    }
    if !weight.is_finite() {
        return Err(Error::invalid(format!("non-finite sample weight {weight}")));
    }
    Ok(())
}

pub(crate) fn default_group_names(count: usize) -> Vec<String> {
    (0..count).map(|a| a.to_string()).collect()
}
