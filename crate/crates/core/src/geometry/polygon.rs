use serde::Serialize;

use super::{cross, segment_distance, RatePoint};
use crate::error::Result;
use crate::joint::JointBinaryDistribution;

/// Convex polygon in rate space with counter-clockwise vertices and no
/// three consecutive collinear vertices. Degenerate hulls keep one or two
/// vertices (a point or a segment).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<RatePoint>,
}

impl ConvexPolygon {
    /// Convex hull of a point set (monotone chain).
    pub fn hull(points: &[RatePoint]) -> Self {
        let mut pts: Vec<RatePoint> = points.to_vec();
        pts.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
        pts.dedup();
        if pts.len() <= 2 {
            return Self { vertices: pts };
        }
        let mut lower: Vec<RatePoint> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<RatePoint> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.len() == 2 && lower[0] == lower[1] {
            lower.pop();
        }
        Self { vertices: lower }
    }

    pub fn vertices(&self) -> &[RatePoint] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (RatePoint, RatePoint)> + '_ {
        let n = self.vertices.len();
        let count = match n {
            0 | 1 => 0,
            2 => 1,
            _ => n,
        };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.fpr * b.tpr - b.fpr * a.tpr
            })
            .sum();
        twice / 2.0
    }

    /// Membership with an absolute distance slack.
    pub fn contains(&self, p: RatePoint, slack: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => p.distance(self.vertices[0]) <= slack,
            2 => segment_distance(p, self.vertices[0], self.vertices[1]).0 <= slack,
            _ => self.edges().all(|(a, b)| {
                let len = a.distance(b);
                cross(a, b, p) >= -slack * len
            }),
        }
    }

    /// Smallest false positive rate among polygon points with the given
    /// true positive rate, if any.
    pub fn min_fpr_at_tpr(&self, tpr: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut offer = |x: f64| best = Some(best.map_or(x, |b: f64| b.min(x)));
        for &v in &self.vertices {
            if v.tpr == tpr {
                offer(v.fpr);
            }
        }
        for (a, b) in self.edges() {
            let (lo, hi) = if a.tpr <= b.tpr { (a, b) } else { (b, a) };
            if lo.tpr < tpr && tpr < hi.tpr {
                let t = (tpr - lo.tpr) / (hi.tpr - lo.tpr);
                offer(lo.fpr + t * (hi.fpr - lo.fpr));
            }
        }
        best
    }
}

/// Rates reachable by randomizing a binary predictor within one group:
/// the hull of `(0,0)`, `γ_a(Ŷ)`, `γ_a(1-Ŷ)` and `(1,1)`.
pub fn binary_polytope(joint: &JointBinaryDistribution, group: usize) -> Result<ConvexPolygon> {
    let gamma = joint.gamma(group)?;
    Ok(ConvexPolygon::hull(&[RatePoint::ORIGIN, gamma, gamma.complement(), RatePoint::ONE]))
}
