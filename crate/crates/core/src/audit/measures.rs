use serde::Serialize;

use super::AuditInput;
use crate::error::{Error, Result};
use crate::joint::{ConditionalScoreDistribution, EmpiricalDistribution};

/// Where a worst-case gap occurred.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Gap {
    pub value: f64,
    /// Outcome conditioned on, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
    /// The pair of groups attaining the gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<(usize, usize)>,
    /// Score threshold attaining the gap, for score inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Gap {
    fn keep_larger(&mut self, other: Gap) {
        if other.value > self.value {
            *self = other;
        }
    }
}

/// Kolmogorov distance `sup_t |F(t) - G(t)|` and a threshold attaining it.
pub fn ks_distance(f: &EmpiricalDistribution, g: &EmpiricalDistribution) -> (f64, f64) {
    let (fs, fm) = (f.support(), f.masses());
    let (gs, gm) = (g.support(), g.masses());
    let (mut i, mut j) = (0, 0);
    let (mut cf, mut cg) = (0.0, 0.0);
    let mut best = (0.0, f64::NEG_INFINITY);
    while i < fs.len() || j < gs.len() {
        let t = match (fs.get(i), gs.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < fs.len() && fs[i] == t {
            cf += fm[i];
            i += 1;
        }
        while j < gs.len() && gs[j] == t {
            cg += gm[j];
            j += 1;
        }
        let gap = (cf - cg).abs();
        if gap > best.0 {
            best = (gap, t);
        }
    }
    best
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |a| (a + 1..k).map(move |b| (a, b)))
}

pub(crate) fn rate_gap(input: AuditInput<'_>, outcomes: &[bool]) -> Gap {
    let mut worst = Gap::default();
    match input {
        AuditInput::Binary(joint) => {
            for &y in outcomes {
                for (a, b) in pairs(joint.group_count()) {
                    let value = (joint.positive_rate(a, y) - joint.positive_rate(b, y)).abs();
                    worst.keep_larger(Gap { value, outcome: Some(y.into()), groups: Some((a, b)), threshold: None });
                }
            }
        }
        AuditInput::Score(dist) => {
            for &y in outcomes {
                for (a, b) in pairs(dist.group_count()) {
                    let (value, t) = ks_distance(dist.conditional(a, y), dist.conditional(b, y));
                    worst.keep_larger(Gap { value, outcome: Some(y.into()), groups: Some((a, b)), threshold: Some(t) });
                }
            }
        }
    }
    worst
}

pub(crate) fn parity_gap(input: AuditInput<'_>) -> Gap {
    let mut worst = Gap::default();
    match input {
        AuditInput::Binary(joint) => {
            for (a, b) in pairs(joint.group_count()) {
                let value = (joint.acceptance_rate(a) - joint.acceptance_rate(b)).abs();
                worst.keep_larger(Gap { value, outcome: None, groups: Some((a, b)), threshold: None });
            }
        }
        AuditInput::Score(dist) => {
            let marginals: Vec<EmpiricalDistribution> =
                (0..dist.group_count()).map(|a| dist.group_marginal(a)).collect();
            for (a, b) in pairs(dist.group_count()) {
                let (value, t) = ks_distance(&marginals[a], &marginals[b]);
                worst.keep_larger(Gap { value, outcome: None, groups: Some((a, b)), threshold: Some(t) });
            }
        }
    }
    worst
}

/// Largest gap across groups in `Pr{Ŷ=1 | A, Y=y}` (binary) or in the
/// conditional score CDFs given `Y=y` (score), over both outcomes.
pub fn equalized_odds_violation<'a>(input: impl Into<AuditInput<'a>>) -> f64 {
    rate_gap(input.into(), &[false, true]).value
}

/// As [`equalized_odds_violation`], restricted to `Y = 1`.
pub fn equal_opportunity_violation<'a>(input: impl Into<AuditInput<'a>>) -> f64 {
    rate_gap(input.into(), &[true]).value
}

/// Largest gap across groups in acceptance rates (binary) or in the score
/// CDFs given the group (score).
pub fn demographic_parity_violation<'a>(input: impl Into<AuditInput<'a>>) -> f64 {
    parity_gap(input.into()).value
}

/// `max_{a,y} sup_t |Pr{R <= t | A=a, Y=y} - Pr{R' <= t | A=a, Y=y}|`.
pub fn conditional_kolmogorov_distance(
    r1: &ConditionalScoreDistribution,
    r2: &ConditionalScoreDistribution,
) -> Result<f64> {
    if !r1.same_structure(r2) {
        return Err(Error::StructureMismatch);
    }
    let mut worst: f64 = 0.0;
    for a in 0..r1.group_count() {
        for y in [false, true] {
            worst = worst.max(ks_distance(r1.conditional(a, y), r2.conditional(a, y)).0);
        }
    }
    Ok(worst)
}
