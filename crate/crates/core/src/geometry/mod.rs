//! Rate-space geometry: binary polytopes, conditional ROC curves, their
//! achievable regions, region intersection, and the decomposition of a
//! feasible rate point into a randomized threshold rule.

mod mixture;
mod polygon;
mod region;
mod roc;

pub use crate::joint::RatePoint;
pub use mixture::{point_to_mixture, ThresholdRule};
pub use polygon::{binary_polytope, ConvexPolygon};
pub use region::{achievable_region, intersect_regions, upper_hull_indices, FeasibleRegion};
pub use roc::{conditional_roc, RocCurve, RocPoint};

/// Slack allowed when testing whether a point is feasible.
pub const FEASIBILITY_SLACK: f64 = 1e-9;
/// Tolerance on discrete second differences in concavity checks.
pub const CONVEXITY_TOLERANCE: f64 = 1e-12;

pub(crate) fn cross(o: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    (a.fpr - o.fpr) * (b.tpr - o.tpr) - (a.tpr - o.tpr) * (b.fpr - o.fpr)
}

/// Distance from `p` to the segment `[a, b]` and the clamped projection
/// parameter along it.
pub(crate) fn segment_distance(p: RatePoint, a: RatePoint, b: RatePoint) -> (f64, f64) {
    let dx = b.fpr - a.fpr;
    let dy = b.tpr - a.tpr;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.distance(a), 0.0);
    }
    let t = (((p.fpr - a.fpr) * dx + (p.tpr - a.tpr) * dy) / len2).clamp(0.0, 1.0);
    (p.distance(a.lerp(b, t)), t)
}

/// Serializes thresholds as JSON numbers, with the infinite sentinels
/// written as the strings `"+inf"` and `"-inf"`.
pub mod threshold_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *value == f64::INFINITY {
            s.serialize_str("+inf")
        } else if *value == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("invalid threshold {other:?}"))),
            },
        }
    }
}
