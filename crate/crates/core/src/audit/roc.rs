use serde::Serialize;

use crate::error::Result;
use crate::geometry::{conditional_roc, segment_distance, RatePoint};
use crate::joint::ConditionalScoreDistribution;

/// Samples per curve, spread by arc length, when measuring the distance
/// between curve images. Vertices are always included.
pub const CURVE_SAMPLES: usize = 2000;

/// Outcome of comparing group ROC curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCheck {
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<(usize, usize)>,
    /// Threshold attaining the gap (identical-curve check only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// Largest Euclidean distance between same-threshold points of two groups'
/// ROC curves, over every observed score value.
pub fn identical_roc_check(dist: &ConditionalScoreDistribution, tol: f64) -> RocCheck {
    let thresholds = dist.pooled_support();
    let k = dist.group_count();
    let mut worst = (0.0, None, None);
    for &t in &thresholds {
        let rates: Vec<RatePoint> = (0..k).map(|a| dist.rates_at(a, t)).collect();
        for a in 0..k {
            for b in a + 1..k {
                let gap = rates[a].distance(rates[b]);
                if gap > worst.0 {
                    worst = (gap, Some((a, b)), Some(t));
                }
            }
        }
    }
    RocCheck { gap: worst.0, tolerance: tol, passed: worst.0 <= tol, groups: worst.1, threshold: worst.2 }
}

/// Symmetric Hausdorff distance between the groups' ROC curves, each
/// taken as the polyline through its points (thresholds are ignored).
pub fn matching_roc_check(dist: &ConditionalScoreDistribution, tol: f64) -> Result<RocCheck> {
    let curves: Vec<Vec<RatePoint>> = (0..dist.group_count())
        .map(|a| Ok(conditional_roc(dist, a)?.rates().collect()))
        .collect::<Result<_>>()?;
    let mut worst = (0.0, None);
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let gap = hausdorff(&curves[a], &curves[b]);
            if gap > worst.0 {
                worst = (gap, Some((a, b)));
            }
        }
    }
    Ok(RocCheck { gap: worst.0, tolerance: tol, passed: worst.0 <= tol, groups: worst.1, threshold: None })
}

/// Symmetric Hausdorff distance between two monotone polylines.
pub fn hausdorff(a: &[RatePoint], b: &[RatePoint]) -> f64 {
    directed(a, b).max(directed(b, a))
}

fn directed(from: &[RatePoint], to: &[RatePoint]) -> f64 {
    let length: f64 = from.windows(2).map(|w| w[0].distance(w[1])).sum();
    let spacing = length / CURVE_SAMPLES as f64;
    let mut worst = from.iter().map(|&p| distance_to_polyline(p, to)).fold(0.0, f64::max);
    if spacing > 0.0 {
        for w in from.windows(2) {
            let steps = (w[0].distance(w[1]) / spacing).ceil() as usize;
            for s in 1..steps {
                let p = w[0].lerp(w[1], s as f64 / steps as f64);
                worst = worst.max(distance_to_polyline(p, to));
            }
        }
    }
    worst
}

/// Distance from `p` to a polyline whose coordinates are both
/// nondecreasing, examining only segments that can be within the current
/// best distance.
fn distance_to_polyline(p: RatePoint, line: &[RatePoint]) -> f64 {
    if line.len() == 1 {
        return p.distance(line[0]);
    }
    let near = line.partition_point(|v| v.fpr < p.fpr).min(line.len() - 1);
    let mut best = p.distance(line[near]);
    if near > 0 {
        best = best.min(p.distance(line[near - 1]));
    }
    // Segment i joins line[i] and line[i + 1].
    let first_f = line.partition_point(|v| v.fpr < p.fpr - best).saturating_sub(1);
    let end_f = line.partition_point(|v| v.fpr <= p.fpr + best);
    let first_t = line.partition_point(|v| v.tpr < p.tpr - best).saturating_sub(1);
    let end_t = line.partition_point(|v| v.tpr <= p.tpr + best);
    let first = first_f.max(first_t);
    let end = end_f.min(end_t).min(line.len() - 1);
    for i in first..end {
        best = best.min(segment_distance(p, line[i], line[i + 1]).0);
    }
    best
}
