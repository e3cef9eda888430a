use serde::{Deserialize, Serialize};

use super::{check_weight, default_group_names, GroupLabel, RatePoint, MASS_TOLERANCE};
use crate::error::{Error, Result};

/// One weighted observation of a binary predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinarySample {
    pub group: usize,
    pub prediction: bool,
    pub outcome: bool,
    pub weight: f64,
}

impl BinarySample {
    pub fn new(group: usize, prediction: bool, outcome: bool, weight: f64) -> Self {
        Self { group, prediction, outcome, weight }
    }
}

/// Probability table of `(Ŷ, A, Y)`: `cells[a][ŷ][y] = Pr{A=a, Ŷ=ŷ, Y=y}`.
///
/// Construction guarantees that every `(a, y)` conditioning event has
/// positive probability, so rates are always defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointBinaryDistribution {
    groups: Vec<String>,
    cells: Vec<[[f64; 2]; 2]>,
}

impl JointBinaryDistribution {
    pub fn from_cells(groups: Vec<String>, cells: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        if groups.len() != cells.len() {
            return Err(Error::invalid(format!(
                "{} group names for {} groups",
                groups.len(),
                cells.len()
            )));
        }
        if cells.is_empty() {
            return Err(Error::invalid("joint distribution has no groups"));
        }
        let mut total = 0.0;
        for cell in cells.iter().flatten().flatten() {
            if !cell.is_finite() || *cell < 0.0 {
                return Err(Error::invalid(format!("cell probability {cell} is not in [0, 1]")));
            }
            total += cell;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("cells sum to {total}, expected 1")));
        }
        for (a, group) in cells.iter().enumerate() {
            for y in 0..2 {
                if group[0][y] + group[1][y] <= 0.0 {
                    return Err(Error::EmptyGroupOutcome { group: a, outcome: y as u8 });
                }
            }
        }
        Ok(Self { groups, cells })
    }

    /// Builds a table from unnormalized non-negative cell weights.
    pub fn from_weights(groups: Vec<String>, weights: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let total: f64 = weights.iter().flatten().flatten().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("total weight must be positive and finite"));
        }
        let cells = weights
            .into_iter()
            .map(|g| g.map(|row| row.map(|w| w / total)))
            .collect();
        Self::from_cells(groups, cells)
    }

    pub fn group_count(&self) -> usize {
        self.cells.len()
    }

    pub fn group_names(&self) -> &[String] {
        &self.groups
    }

    pub fn group_label(&self, group: usize) -> Result<GroupLabel> {
        let name = self.groups.get(group).ok_or(Error::UnknownGroup(group))?;
        Ok(GroupLabel { id: group, name: name.clone() })
    }

    pub fn cells(&self) -> &[[[f64; 2]; 2]] {
        &self.cells
    }

    /// `Pr{A=group, Ŷ=prediction, Y=outcome}`.
    pub fn cell(&self, group: usize, prediction: bool, outcome: bool) -> f64 {
        self.cells[group][prediction as usize][outcome as usize]
    }

    /// `Pr{A=group, Y=outcome}`.
    pub fn group_outcome_mass(&self, group: usize, outcome: bool) -> f64 {
        let y = outcome as usize;
        self.cells[group][0][y] + self.cells[group][1][y]
    }

    pub fn prior(&self, group: usize) -> f64 {
        self.group_outcome_mass(group, false) + self.group_outcome_mass(group, true)
    }

    /// `Pr{Y=1 | A=group}`.
    pub fn base_rate(&self, group: usize) -> f64 {
        self.group_outcome_mass(group, true) / self.prior(group)
    }

    /// `Pr{Y=outcome}`.
    pub fn outcome_mass(&self, outcome: bool) -> f64 {
        (0..self.group_count()).map(|a| self.group_outcome_mass(a, outcome)).sum()
    }

    /// `Pr{Ŷ=1 | A=group}`.
    pub fn acceptance_rate(&self, group: usize) -> f64 {
        let g = &self.cells[group];
        (g[1][0] + g[1][1]) / self.prior(group)
    }

    /// `Pr{Ŷ=1 | A=group, Y=outcome}`.
    pub fn positive_rate(&self, group: usize, outcome: bool) -> f64 {
        self.cell(group, true, outcome) / self.group_outcome_mass(group, outcome)
    }

    /// Group-conditional (false positive rate, true positive rate).
    pub fn gamma(&self, group: usize) -> Result<RatePoint> {
        if group >= self.group_count() {
            return Err(Error::UnknownGroup(group));
        }
        Ok(RatePoint::new(self.positive_rate(group, false), self.positive_rate(group, true)))
    }

    /// The same table for the complementary predictor `1 - Ŷ`.
    pub fn flipped(&self) -> Self {
        let cells = self.cells.iter().map(|g| [g[1], g[0]]).collect();
        Self { groups: self.groups.clone(), cells }
    }
}

/// Estimates the joint table by normalized weighted counting.
pub fn estimate_binary_joint(samples: &[BinarySample]) -> Result<JointBinaryDistribution> {
    let group_count = samples.iter().map(|s| s.group + 1).max().unwrap_or(0);
    estimate_binary_joint_named(samples, default_group_names(group_count))
}

pub(crate) fn estimate_binary_joint_named(
    samples: &[BinarySample],
    groups: Vec<String>,
) -> Result<JointBinaryDistribution> {
    if groups.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut weights = vec![[[0.0; 2]; 2]; groups.len()];
    for sample in samples {
        check_weight(sample.weight)?;
        let cell = weights.get_mut(sample.group).ok_or(Error::UnknownGroup(sample.group))?;
        cell[sample.prediction as usize][sample.outcome as usize] += sample.weight;
    }
    for (a, w) in weights.iter().enumerate() {
        for y in 0..2 {
            if w[0][y] + w[1][y] <= 0.0 {
                return Err(Error::EmptyGroupOutcome { group: a, outcome: y as u8 });
            }
        }
    }
    JointBinaryDistribution::from_weights(groups, weights)
}
