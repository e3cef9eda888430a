//! Loss-optimal derived predictors.
//!
//! [`binary`] solves the small linear program for a binary predictor;
//! [`score`] searches randomized threshold policies for a real-valued score.

pub mod binary;
pub mod score;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binary::{
    apply_derived, derive, derive_equal_opportunity, derive_equalized_odds, expected_loss,
    AdjustmentResult, DerivedBinaryPredictor,
};
pub use score::{
    apply_policy, optimize, optimize_demographic_parity, optimize_equal_opportunity,
    optimize_equalized_odds, optimize_group_blind, optimize_max_profit, policy_loss, policy_rates,
    PolicyReport, RandomizedThresholdPolicy,
};

/// Search tolerance on the one-dimensional coordinate of ternary search.
pub const SEARCH_TOLERANCE: f64 = 1e-9;
/// Iteration cap for ternary search.
pub const SEARCH_ITERATIONS: usize = 200;
/// Tolerance reported for the equality constraints of an emitted solution.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-6;

/// Constraint imposed on a derived predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// No constraint: each group is optimized on its own.
    MaxProfit,
    /// One threshold shared by every group.
    GroupBlind,
    /// Equal acceptance rates.
    DemographicParity,
    /// Equal true positive rates.
    EqualOpportunity,
    /// Equal true and false positive rates.
    EqualizedOdds,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::MaxProfit,
        Criterion::GroupBlind,
        Criterion::DemographicParity,
        Criterion::EqualOpportunity,
        Criterion::EqualizedOdds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::MaxProfit => "max_profit",
            Criterion::GroupBlind => "group_blind",
            Criterion::DemographicParity => "demographic_parity",
            Criterion::EqualOpportunity => "equal_opportunity",
            Criterion::EqualizedOdds => "equalized_odds",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key || (key == "race_blind" && *c == Criterion::GroupBlind))
            .ok_or_else(|| Error::invalid(format!("unknown criterion {s:?}")))
    }
}

/// Minimizes a unimodal function on `[lo, hi]` by ternary search.
pub(crate) fn ternary_search(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, usize) {
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    while hi - lo > SEARCH_TOLERANCE && iterations < SEARCH_ITERATIONS {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        iterations += 1;
    }
    ((lo + hi) / 2.0, iterations)
}

/// Randomization of a probability: 0 for 0 or 1, largest at 1/2.
pub(crate) fn randomization(p: f64) -> f64 {
    p.min(1.0 - p).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_names_round_trip() {
        for c in Criterion::ALL {
            assert_eq!(c.as_str().parse::<Criterion>().unwrap(), c);
            assert_eq!(c.as_str().replace('_', "-").parse::<Criterion>().unwrap(), c);
        }
        assert_eq!("race-blind".parse::<Criterion>().unwrap(), Criterion::GroupBlind);
        assert!("fairness".parse::<Criterion>().is_err());
    }

    #[test]
    fn ternary_search_finds_convex_minimum() {
        let (x, iters) = ternary_search(0.0, 1.0, |x| (x - 0.3).abs());
        assert!((x - 0.3).abs() < 1e-8);
        assert!(iters <= SEARCH_ITERATIONS);
    }
}
