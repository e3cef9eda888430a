//! Oblivious audits: every measure here depends only on the joint
//! distribution of the outcome, the group and the predictor or score.
//!
//! Audits report magnitudes against tolerances. A passing audit measures
//! the absence of a detected violation on this data; it does not establish
//! that a predictor is fair.

mod frequencies;
mod measures;
mod roc;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{ConditionalScoreDistribution, JointBinaryDistribution};

pub use frequencies::{
    bin_edges, binary_matching_frequencies, matching_frequencies_violation, Binning,
    FrequencyOptions, FrequencyResult,
};
pub use measures::{
    conditional_kolmogorov_distance, demographic_parity_violation, equal_opportunity_violation,
    equalized_odds_violation, ks_distance, Gap,
};
pub use roc::{hausdorff, identical_roc_check, matching_roc_check, RocCheck, CURVE_SAMPLES};

/// What is being audited.
#[derive(Debug, Clone, Copy)]
pub enum AuditInput<'a> {
    Binary(&'a JointBinaryDistribution),
    Score(&'a ConditionalScoreDistribution),
}

impl<'a> From<&'a JointBinaryDistribution> for AuditInput<'a> {
    fn from(joint: &'a JointBinaryDistribution) -> Self {
        AuditInput::Binary(joint)
    }
}

impl<'a> From<&'a ConditionalScoreDistribution> for AuditInput<'a> {
    fn from(dist: &'a ConditionalScoreDistribution) -> Self {
        AuditInput::Score(dist)
    }
}

impl AuditInput<'_> {
    pub fn group_names(&self) -> &[String] {
        match self {
            AuditInput::Binary(j) => j.group_names(),
            AuditInput::Score(d) => d.group_names(),
        }
    }

    fn group_outcome_mass(&self) -> Vec<[f64; 2]> {
        (0..self.group_names().len())
            .map(|a| {
                [false, true].map(|y| match self {
                    AuditInput::Binary(j) => j.group_outcome_mass(a, y),
                    AuditInput::Score(d) => d.group_outcome_mass(a, y),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCriterion {
    EqualizedOdds,
    EqualOpportunity,
    DemographicParity,
    IdenticalRoc,
    MatchingRoc,
    MatchingFrequencies,
}

impl AuditCriterion {
    pub const ALL: [AuditCriterion; 6] = [
        AuditCriterion::EqualizedOdds,
        AuditCriterion::EqualOpportunity,
        AuditCriterion::DemographicParity,
        AuditCriterion::IdenticalRoc,
        AuditCriterion::MatchingRoc,
        AuditCriterion::MatchingFrequencies,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditCriterion::EqualizedOdds => "equalized_odds",
            AuditCriterion::EqualOpportunity => "equal_opportunity",
            AuditCriterion::DemographicParity => "demographic_parity",
            AuditCriterion::IdenticalRoc => "identical_roc",
            AuditCriterion::MatchingRoc => "matching_roc",
            AuditCriterion::MatchingFrequencies => "matching_frequencies",
        }
    }

    /// Default tolerance, sized for sampling noise at around 10^5 records.
    pub fn default_tolerance(self) -> f64 {
        match self {
            AuditCriterion::EqualizedOdds
            | AuditCriterion::EqualOpportunity
            | AuditCriterion::DemographicParity => 0.02,
            AuditCriterion::IdenticalRoc | AuditCriterion::MatchingRoc => 0.03,
            // Binned estimates of a calibrated score still scatter up to
            // about 0.08 at 10^5 records; a miscalibrated one is far above.
            AuditCriterion::MatchingFrequencies => 0.1,
        }
    }
}

impl fmt::Display for AuditCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AuditCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| Error::invalid(format!("unknown audit criterion {s:?}")))
    }
}

/// Which criteria to evaluate and at what tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub criteria: Vec<AuditCriterion>,
    /// Overrides of [`AuditCriterion::default_tolerance`].
    pub tolerances: BTreeMap<AuditCriterion, f64>,
    pub frequencies: FrequencyOptions,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            criteria: AuditCriterion::ALL.to_vec(),
            tolerances: BTreeMap::new(),
            frequencies: FrequencyOptions::default(),
        }
    }
}

impl AuditConfig {
    pub fn with_criteria(criteria: Vec<AuditCriterion>) -> Self {
        Self { criteria, ..Self::default() }
    }

    /// Uses one tolerance for every criterion.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        for c in AuditCriterion::ALL {
            self.tolerances.insert(c, tol);
        }
        self
    }

    pub fn tolerance(&self, criterion: AuditCriterion) -> f64 {
        self.tolerances.get(&criterion).copied().unwrap_or_else(|| criterion.default_tolerance())
    }
}

/// Supporting detail for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Detail {
    Gap(Gap),
    Roc(RocCheck),
    Frequencies(FrequencyResult),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub criterion: AuditCriterion,
    /// `None` when the criterion was skipped.
    pub violation: Option<f64>,
    pub tolerance: f64,
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Detail>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionResult {
    fn measured(criterion: AuditCriterion, violation: f64, tolerance: f64, detail: Detail) -> Self {
        Self {
            criterion,
            violation: Some(violation),
            tolerance,
            passed: Some(violation <= tolerance),
            detail: Some(detail),
            notes: Vec::new(),
        }
    }

    fn skipped(criterion: AuditCriterion, tolerance: f64, note: &str) -> Self {
        Self { criterion, violation: None, tolerance, passed: None, detail: None, notes: vec![note.into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// `"binary"` or `"score"`.
    pub kind: String,
    pub groups: Vec<String>,
    /// `Pr{A=a, Y=y}` per group, to judge how balanced the data are.
    pub group_outcome_mass: Vec<[f64; 2]>,
    pub results: Vec<CriterionResult>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn result(&self, criterion: AuditCriterion) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.criterion == criterion)
    }

    /// Whether every evaluated criterion is within tolerance.
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed != Some(false))
    }

    /// Largest ratio of violation to tolerance over evaluated criteria
    /// (0 when nothing was evaluated).
    pub fn worst_ratio(&self) -> f64 {
        self.results
            .iter()
            .filter_map(|r| {
                let v = r.violation?;
                Some(if r.tolerance > 0.0 { v / r.tolerance } else if v > 0.0 { f64::INFINITY } else { 0.0 })
            })
            .fold(0.0, f64::max)
    }
}

/// Runs the configured criteria. Criteria that need a score are skipped,
/// with a note, for binary inputs.
pub fn audit<'a>(input: impl Into<AuditInput<'a>>, config: &AuditConfig) -> Result<AuditReport> {
    let input = input.into();
    let mut results = Vec::with_capacity(config.criteria.len());
    for &criterion in &config.criteria {
        let tol = config.tolerance(criterion);
        let result = match (criterion, input) {
            (AuditCriterion::EqualizedOdds, _) => {
                let gap = measures::rate_gap(input, &[false, true]);
                CriterionResult::measured(criterion, gap.value, tol, Detail::Gap(gap))
            }
            (AuditCriterion::EqualOpportunity, _) => {
                let gap = measures::rate_gap(input, &[true]);
                CriterionResult::measured(criterion, gap.value, tol, Detail::Gap(gap))
            }
            (AuditCriterion::DemographicParity, _) => {
                let gap = measures::parity_gap(input);
                CriterionResult::measured(criterion, gap.value, tol, Detail::Gap(gap))
            }
            (AuditCriterion::IdenticalRoc | AuditCriterion::MatchingRoc, AuditInput::Binary(_)) => {
                CriterionResult::skipped(criterion, tol, "requires a score; not applicable to a binary predictor")
            }
            (AuditCriterion::IdenticalRoc, AuditInput::Score(dist)) => {
                let check = identical_roc_check(dist, tol);
                CriterionResult::measured(criterion, check.gap, tol, Detail::Roc(check))
            }
            (AuditCriterion::MatchingRoc, AuditInput::Score(dist)) => {
                let check = matching_roc_check(dist, tol)?;
                CriterionResult::measured(criterion, check.gap, tol, Detail::Roc(check))
            }
            (AuditCriterion::MatchingFrequencies, AuditInput::Binary(joint)) => {
                let mut freq = binary_matching_frequencies(joint);
                let notes = std::mem::take(&mut freq.notes);
                let mut r = CriterionResult::measured(criterion, freq.violation, tol, Detail::Frequencies(freq));
                r.notes = notes;
                r
            }
            (AuditCriterion::MatchingFrequencies, AuditInput::Score(dist)) => {
                let mut freq = matching_frequencies_violation(dist, &config.frequencies)?;
                let notes = std::mem::take(&mut freq.notes);
                let mut r = CriterionResult::measured(criterion, freq.violation, tol, Detail::Frequencies(freq));
                r.notes = notes;
                r
            }
        };
        results.push(result);
    }
    let kind = match input {
        AuditInput::Binary(_) => "binary",
        AuditInput::Score(_) => "score",
    };
    Ok(AuditReport {
        kind: kind.into(),
        groups: input.group_names().to_vec(),
        group_outcome_mass: input.group_outcome_mass(),
        results,
        notes: vec!["violations are measured on the supplied distribution; passing does not prove fairness".into()],
    })
}
