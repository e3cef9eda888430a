use serde::{Deserialize, Serialize};

use super::{threshold_serde, RatePoint};
use crate::error::{Error, Result};
use crate::joint::ConditionalScoreDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

impl RocPoint {
    pub fn rates(&self) -> RatePoint {
        RatePoint::new(self.fpr, self.tpr)
    }
}

/// Group-conditional ROC curve of the thresholdings `I{R > t}`.
///
/// Points are ordered by strictly decreasing threshold, from `(0, 0)` at
/// `t = +inf` to `(1, 1)` at `t = -inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    /// Validates threshold order, coordinate monotonicity and endpoints.
    pub fn from_points(points: Vec<RocPoint>) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::invalid("empty ROC curve"))?;
        let last = points.last().unwrap();
        if points.len() < 2
            || first.threshold != f64::INFINITY
            || first.rates() != RatePoint::ORIGIN
            || last.threshold != f64::NEG_INFINITY
            || last.rates() != RatePoint::ONE
        {
            return Err(Error::invalid("ROC curve must run from (0,0) at +inf to (1,1) at -inf"));
        }
        for w in points.windows(2) {
            if !(w[0].threshold > w[1].threshold) || w[1].fpr < w[0].fpr || w[1].tpr < w[0].tpr {
                return Err(Error::invalid("ROC curve points are not monotone"));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn rates(&self) -> impl Iterator<Item = RatePoint> + '_ {
        self.points.iter().map(RocPoint::rates)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// JSON array of `[threshold, fpr, tpr]` triples.
    pub fn to_json(&self) -> serde_json::Value {
        let threshold = |t: f64| match t {
            f64::INFINITY => serde_json::json!("+inf"),
            f64::NEG_INFINITY => serde_json::json!("-inf"),
            t => serde_json::json!(t),
        };
        self.points
            .iter()
            .map(|p| serde_json::json!([threshold(p.threshold), p.fpr, p.tpr]))
            .collect()
    }
}

/// The ROC curve of group `group`: one point per distinct score value of the
/// group (thresholding at the largest value coincides with `+inf`).
pub fn conditional_roc(dist: &ConditionalScoreDistribution, group: usize) -> Result<RocCurve> {
    dist.check_group(group)?;
    let support = dist.group_support(group);
    let mut points = Vec::with_capacity(support.len() + 1);
    points.push(RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 });
    // support[len-1] yields (0,0) again; skip it.
    for &t in support.iter().rev().skip(1) {
        let r = dist.rates_at(group, t);
        points.push(RocPoint { threshold: t, fpr: r.fpr, tpr: r.tpr });
    }
    points.push(RocPoint { threshold: f64::NEG_INFINITY, fpr: 1.0, tpr: 1.0 });
    Ok(RocCurve { points })
}
