use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{ConditionalScoreDistribution, JointBinaryDistribution};

/// How scores are grouped before comparing `Pr{Y=1 | R in bin, A=a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    /// Bins of (nearly) equal mass under the pooled score distribution.
    EqualMass { bins: usize },
    /// Interior cut points; bins are `(-inf, e1], (e1, e2], ..., (ek, inf)`.
    Edges { edges: Vec<f64> },
}

/// Binning plus the rule for dropping sparsely populated cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyOptions {
    pub binning: Binning,
    /// A `(bin, group)` cell is excluded when it holds less than
    /// `min_cell_share / bins` of the group's mass. Zero keeps every
    /// nonempty cell.
    pub min_cell_share: f64,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        Self { binning: Binning::EqualMass { bins: 20 }, min_cell_share: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyResult {
    pub violation: f64,
    pub bins: usize,
    /// `(lower, upper]` of the bin attaining the violation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_bin: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<(usize, usize)>,
    /// `Pr{Y=1 | bin, A=a}` per bin and group; `None` for excluded cells.
    pub precision: Vec<Vec<Option<f64>>>,
    pub notes: Vec<String>,
}

/// Cut points for the requested binning of the pooled score.
pub fn bin_edges(dist: &ConditionalScoreDistribution, binning: &Binning) -> Result<Vec<f64>> {
    match binning {
        Binning::EqualMass { bins: 0 } => Err(Error::invalid("at least one bin is required")),
        Binning::EqualMass { bins } => {
            let pooled = dist.pooled_marginal();
            let mut cumulative = 0.0;
            let mut edges = Vec::new();
            let mut next = 1;
            for (s, m) in pooled.iter() {
                cumulative += m;
                while next < *bins && cumulative >= next as f64 / *bins as f64 - 1e-12 {
                    if edges.last() != Some(&s) {
                        edges.push(s);
                    }
                    next += 1;
                }
            }
            if edges.last() == pooled.support().last() {
                edges.pop();
            }
            Ok(edges)
        }
        Binning::Edges { edges } => {
            if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("bin edges must be finite and strictly increasing"));
            }
            Ok(edges.clone())
        }
    }
}

/// Largest gap across groups in `Pr{Y=1 | R in bin, A=a}` over bins.
pub fn matching_frequencies_violation(
    dist: &ConditionalScoreDistribution,
    options: &FrequencyOptions,
) -> Result<FrequencyResult> {
    let edges = bin_edges(dist, &options.binning)?;
    let bounds: Vec<(f64, f64)> = std::iter::once(f64::NEG_INFINITY)
        .chain(edges.iter().copied())
        .zip(edges.iter().copied().chain(std::iter::once(f64::INFINITY)))
        .collect();
    let k = dist.group_count();
    let floor = options.min_cell_share / bounds.len() as f64;
    let mut notes = Vec::new();
    let mut precision = vec![vec![None; k]; bounds.len()];
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        for a in 0..k {
            let neg = dist.group_outcome_mass(a, false) * dist.conditional(a, false).interval_mass(lo, hi);
            let pos = dist.group_outcome_mass(a, true) * dist.conditional(a, true).interval_mass(lo, hi);
            let share = (neg + pos) / dist.prior(a);
            if neg + pos <= 0.0 {
                notes.push(format!("bin {i} ({lo}, {hi}] is empty for group {a}; excluded"));
            } else if share < floor {
                notes.push(format!(
                    "bin {i} ({lo}, {hi}] holds {share:.2e} of group {a}, below {floor:.2e}; excluded"
                ));
            } else {
                precision[i][a] = Some(pos / (neg + pos));
            }
        }
    }
    Ok(summarize(precision, bounds.iter().map(|&b| Some(b)).collect(), notes))
}

/// The binary form: the two bins are the predictor's values, so this
/// compares `Pr{Y=1 | Ŷ=ŷ, A=a}` across groups.
pub fn binary_matching_frequencies(joint: &JointBinaryDistribution) -> FrequencyResult {
    let k = joint.group_count();
    let mut notes = vec![
        "binary predictor: bins are the predicted values; thresholdings of a score need not inherit this property"
            .to_string(),
    ];
    let mut precision = vec![vec![None; k]; 2];
    for (b, row) in precision.iter_mut().enumerate() {
        let pred = b == 1;
        for (a, cell) in row.iter_mut().enumerate() {
            let neg = joint.cell(a, pred, false);
            let pos = joint.cell(a, pred, true);
            if neg + pos > 0.0 {
                *cell = Some(pos / (neg + pos));
            } else {
                notes.push(format!("no mass with prediction {b} in group {a}; excluded"));
            }
        }
    }
    summarize(precision, vec![None, None], notes)
}

fn summarize(
    precision: Vec<Vec<Option<f64>>>,
    bounds: Vec<Option<(f64, f64)>>,
    notes: Vec<String>,
) -> FrequencyResult {
    let mut worst = (0.0, None, None);
    for (row, bound) in precision.iter().zip(&bounds) {
        for a in 0..row.len() {
            for b in a + 1..row.len() {
                if let (Some(pa), Some(pb)) = (row[a], row[b]) {
                    let gap = (pa - pb).abs();
                    if gap > worst.0 {
                        worst = (gap, *bound, Some((a, b)));
                    }
                }
            }
        }
    }
    FrequencyResult {
        violation: worst.0,
        bins: precision.len(),
        worst_bin: worst.1,
        groups: worst.2,
        precision,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{default_group_names, estimate_score_distribution, ScoreSample};

    #[test]
    fn one_group_has_no_violation() {
        let dist = estimate_score_distribution(&[
            ScoreSample::new(0, 0.2, false, 1.0),
            ScoreSample::new(0, 0.6, true, 1.0),
        ])
        .unwrap();
        let result = matching_frequencies_violation(&dist, &FrequencyOptions::default()).unwrap();
        assert_eq!(result.violation, 0.0);
    }

    #[test]
    fn equal_mass_edges_split_the_pooled_score() {
        let samples: Vec<_> = (0..100)
            .map(|i| ScoreSample::new(i % 2, i as f64, i % 3 == 0, 1.0))
            .collect();
        let dist = estimate_score_distribution(&samples).unwrap();
        let edges = bin_edges(&dist, &Binning::EqualMass { bins: 4 }).unwrap();
        assert_eq!(edges, vec![24.0, 49.0, 74.0]);
    }

    #[test]
    fn calibrated_groups_match_and_shifted_ones_do_not() {
        // Both groups: Pr{Y=1 | R=s} = s, with different score mixes.
        let mut samples = Vec::new();
        for (a, weights) in [(0, [3.0, 1.0, 1.0]), (1, [1.0, 1.0, 3.0])] {
            for (s, w) in [0.2, 0.5, 0.8].into_iter().zip(weights) {
                samples.push(ScoreSample::new(a, s, true, w * s));
                samples.push(ScoreSample::new(a, s, false, w * (1.0 - s)));
            }
        }
        let dist = estimate_score_distribution(&samples).unwrap();
        let options = FrequencyOptions { binning: Binning::Edges { edges: vec![0.3, 0.6] }, min_cell_share: 0.0 };
        let result = matching_frequencies_violation(&dist, &options).unwrap();
        assert!(result.violation < 1e-12);

        let shifted = dist.map_scores(|a, s| if a == 1 { s - 0.3 } else { s }).unwrap();
        let result = matching_frequencies_violation(&shifted, &options).unwrap();
        assert!((result.violation - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empty_cells_are_excluded_with_notes() {
        let samples = [
            ScoreSample::new(0, 0.1, false, 1.0),
            ScoreSample::new(0, 0.9, true, 1.0),
            ScoreSample::new(1, 0.9, false, 1.0),
            ScoreSample::new(1, 0.9, true, 1.0),
        ];
        let dist = estimate_score_distribution(&samples).unwrap();
        let options = FrequencyOptions { binning: Binning::Edges { edges: vec![0.5] }, min_cell_share: 0.0 };
        let result = matching_frequencies_violation(&dist, &options).unwrap();
        assert_eq!(result.precision[0][1], None);
        assert_eq!(result.notes.len(), 1);
        assert!((result.violation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn binary_precision_by_cells() {
        let joint = JointBinaryDistribution::from_cells(
            default_group_names(2),
            vec![[[0.10, 0.05], [0.05, 0.20]], [[0.20, 0.10], [0.10, 0.20]]],
        )
        .unwrap();
        let result = binary_matching_frequencies(&joint);
        // Pr{Y=1 | Ŷ=1}: 0.8 vs 2/3; Pr{Y=1 | Ŷ=0}: 1/3 vs 1/3.
        assert!((result.violation - (0.8 - 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(result.bins, 2);
    }
}
