use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    achievable_region, segment_distance, threshold_serde, upper_hull_indices, RatePoint,
    RocCurve, FEASIBILITY_SLACK,
};
use crate::error::{Error, Result};
use crate::joint::ConditionalScoreDistribution;

/// Targets closer than this to a curve point or curve segment are realized
/// on it directly.
const SNAP: f64 = 1e-12;

/// Randomized threshold rule for one group.
///
/// For a score `r` the rule accepts with probability
/// * `Fixed`: 1 if `r > threshold`, else 0;
/// * `Mixture`: 1 if `r > upper`, `p_lower` if `lower < r <= upper`, else 0;
/// * `Floored`: as `Mixture`, but accepts with probability `p_floor` when
///   `r <= lower`.
///
/// Thresholds may be the sentinels `±inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    Fixed {
        #[serde(with = "threshold_serde")]
        threshold: f64,
    },
    Mixture {
        #[serde(with = "threshold_serde")]
        lower: f64,
        #[serde(with = "threshold_serde")]
        upper: f64,
        p_lower: f64,
    },
    Floored {
        #[serde(with = "threshold_serde")]
        lower: f64,
        #[serde(with = "threshold_serde")]
        upper: f64,
        p_lower: f64,
        p_floor: f64,
    },
}

impl ThresholdRule {
    /// `Pr{Ỹ = 1 | R = score}`.
    pub fn acceptance_probability(&self, score: f64) -> f64 {
        match *self {
            ThresholdRule::Fixed { threshold } => f64::from(u8::from(score > threshold)),
            ThresholdRule::Mixture { lower, upper, p_lower } => {
                if score > upper {
                    1.0
                } else if score > lower {
                    p_lower
                } else {
                    0.0
                }
            }
            ThresholdRule::Floored { lower, upper, p_lower, p_floor } => {
                if score > upper {
                    1.0
                } else if score > lower {
                    p_lower
                } else {
                    p_floor
                }
            }
        }
    }

    /// Draws the decision for one score.
    pub fn apply(&self, score: f64, rng: &mut impl Rng) -> bool {
        match self.acceptance_probability(score) {
            p if p >= 1.0 => true,
            p if p <= 0.0 => false,
            p => rng.gen::<f64>() < p,
        }
    }

    /// Exact (fpr, tpr) of the rule within a group.
    pub fn rates(&self, dist: &ConditionalScoreDistribution, group: usize) -> RatePoint {
        let at = |t: f64| dist.rates_at(group, t);
        match *self {
            ThresholdRule::Fixed { threshold } => at(threshold),
            ThresholdRule::Mixture { lower, upper, p_lower } => at(upper).lerp(at(lower), p_lower),
            ThresholdRule::Floored { lower, upper, p_lower, p_floor } => {
                let hi = at(upper);
                let lo = at(lower);
                let w_hi = 1.0 - p_lower;
                let w_lo = p_lower - p_floor;
                RatePoint::new(
                    w_hi * hi.fpr + w_lo * lo.fpr + p_floor,
                    w_hi * hi.tpr + w_lo * lo.tpr + p_floor,
                )
            }
        }
    }

    /// Whether the rule randomizes at all.
    pub fn is_randomized(&self) -> bool {
        !matches!(self, ThresholdRule::Fixed { .. })
    }

    /// Expected value of `Pr{R <= T | A=group}` over the rule's random
    /// threshold `T`, i.e. the rule's threshold on the within-group
    /// percentile scale. Equals one minus the acceptance rate.
    pub fn percentile(&self, dist: &ConditionalScoreDistribution, group: usize) -> f64 {
        1.0 - dist.acceptance_of(group, self.rates(dist, group))
    }
}

/// Realizes a feasible target rate point with a threshold rule on the
/// group's ROC curve.
///
/// Targets on a curve point give a fixed threshold. Targets on the segment
/// between adjacent curve points, or on an edge of the upper hull, give a
/// two-threshold mixture over the bracketing thresholds. Strictly interior
/// targets lie on the chord from `(1, 1)` through a point of the hull
/// boundary; the rule then also accepts below its lower threshold with the
/// probability that places the target on that chord.
pub fn point_to_mixture(roc: &RocCurve, target: RatePoint) -> Result<ThresholdRule> {
    let points = roc.points();
    let rates: Vec<RatePoint> = roc.rates().collect();

    if let Some(p) = points.iter().find(|p| p.rates().distance(target) <= SNAP) {
        return Ok(ThresholdRule::Fixed { threshold: p.threshold });
    }
    for i in 0..rates.len() - 1 {
        let (d, t) = segment_distance(target, rates[i], rates[i + 1]);
        if d <= SNAP {
            return Ok(mixture(points[i + 1].threshold, points[i].threshold, t));
        }
    }

    if !achievable_region(roc).contains(target, FEASIBILITY_SLACK) {
        return Err(Error::Infeasible(target));
    }
    let hull = upper_hull_indices(&rates, true);
    let mut best_edge: Option<(f64, usize, usize, f64)> = None;
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (d, t) = segment_distance(target, rates[i], rates[j]);
        if best_edge.is_none_or(|(bd, ..)| d < bd) {
            best_edge = Some((d, i, j, t));
        }
    }
    let (d, i, j, t) = best_edge.expect("hull has an edge");
    if d <= FEASIBILITY_SLACK {
        return Ok(mixture(points[j].threshold, points[i].threshold, t));
    }

    // Interior: walk from (1,1) through the target to the hull boundary.
    let dir = RatePoint::new(target.fpr - 1.0, target.tpr - 1.0);
    let mut exit: Option<(f64, usize, usize, f64)> = None;
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        if let Some((s, u)) = ray_hits_segment(RatePoint::ONE, dir, rates[i], rates[j]) {
            if s >= 1.0 && exit.is_none_or(|(best, ..)| s > best) {
                exit = Some((s, i, j, u));
            }
        }
    }
    let (s, i, j, u) = exit.ok_or(Error::Infeasible(target))?;
    let floor = 1.0 - 1.0 / s;
    let rule = if u <= SNAP || u >= 1.0 - SNAP {
        let vertex = if u <= SNAP { i } else { j };
        ThresholdRule::Mixture {
            lower: f64::NEG_INFINITY,
            upper: points[vertex].threshold,
            p_lower: floor,
        }
    } else {
        ThresholdRule::Floored {
            lower: points[j].threshold,
            upper: points[i].threshold,
            p_lower: (1.0 - floor) * u + floor,
            p_floor: floor,
        }
    };
    Ok(rule)
}

/// Rule realizing `(1 - p) C(upper) + p C(lower)`.
fn mixture(lower: f64, upper: f64, p: f64) -> ThresholdRule {
    if p <= 0.0 {
        ThresholdRule::Fixed { threshold: upper }
    } else if p >= 1.0 {
        ThresholdRule::Fixed { threshold: lower }
    } else {
        ThresholdRule::Mixture { lower, upper, p_lower: p }
    }
}

/// Intersection of the ray `origin + s·dir` (s ≥ 0) with segment `[a, b]`:
/// returns `(s, u)` with the hit at `a + u (b - a)`.
fn ray_hits_segment(
    origin: RatePoint,
    dir: RatePoint,
    a: RatePoint,
    b: RatePoint,
) -> Option<(f64, f64)> {
    let e = RatePoint::new(b.fpr - a.fpr, b.tpr - a.tpr);
    let denom = dir.fpr * e.tpr - dir.tpr * e.fpr;
    if denom.abs() < 1e-300 {
        return None;
    }
    let w = RatePoint::new(a.fpr - origin.fpr, a.tpr - origin.tpr);
    let s = (w.fpr * e.tpr - w.tpr * e.fpr) / denom;
    let u = (w.fpr * dir.tpr - w.tpr * dir.fpr) / denom;
    (s >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u)).then_some((s, u.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::conditional_roc;
    use crate::joint::{estimate_score_distribution, ScoreSample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dist(rng: &mut impl Rng, support: usize) -> ConditionalScoreDistribution {
        let mut samples = Vec::new();
        for group in 0..2 {
            for outcome in [false, true] {
                for k in 0..support {
                    if rng.gen_bool(0.7) || k == 0 {
                        let bias = if outcome { 1.5 } else { 0.5 };
                        let w: f64 = rng.gen::<f64>() * (1.0 + bias * k as f64 / support as f64);
                        samples.push(ScoreSample::new(group, k as f64, outcome, w + 1e-3));
                    }
                }
            }
        }
        estimate_score_distribution(&samples).unwrap()
    }

    #[test]
    fn curve_point_gives_fixed_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dist = random_dist(&mut rng, 10);
        let roc = conditional_roc(&dist, 0).unwrap();
        for p in roc.points() {
            let rule = point_to_mixture(&roc, p.rates()).unwrap();
            assert_eq!(rule, ThresholdRule::Fixed { threshold: p.threshold });
        }
    }

    #[test]
    fn midpoint_of_adjacent_points_is_an_even_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dist = random_dist(&mut rng, 10);
        let roc = conditional_roc(&dist, 1).unwrap();
        let pts = roc.points();
        for w in pts.windows(2) {
            let mid = w[0].rates().lerp(w[1].rates(), 0.5);
            match point_to_mixture(&roc, mid).unwrap() {
                ThresholdRule::Mixture { lower, upper, p_lower } => {
                    assert_eq!((lower, upper), (w[1].threshold, w[0].threshold));
                    assert!((p_lower - 0.5).abs() < 1e-12);
                }
                other => panic!("unexpected rule {other:?}"),
            }
        }
    }

    #[test]
    fn exact_rates_reproduce_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let dist = random_dist(&mut rng, 15);
            let roc = conditional_roc(&dist, 0).unwrap();
            let region = achievable_region(&roc);
            for _ in 0..50 {
                let x: f64 = rng.gen();
                let hi = region.boundary(x);
                let target = RatePoint::new(x, x + rng.gen::<f64>() * (hi - x));
                let rule = point_to_mixture(&roc, target).unwrap();
                assert!(rule.rates(&dist, 0).distance(target) < 1e-9, "{rule:?} {target:?}");
            }
            let top = RatePoint::new(0.5, region.boundary(0.5));
            let rule = point_to_mixture(&roc, top).unwrap();
            assert!(!matches!(rule, ThresholdRule::Floored { .. }));
            assert!(rule.rates(&dist, 0).distance(top) < 1e-9);
        }
    }

    #[test]
    fn diagonal_target_is_a_constant_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dist = random_dist(&mut rng, 6);
        let roc = conditional_roc(&dist, 0).unwrap();
        let rule = point_to_mixture(&roc, RatePoint::new(0.3, 0.3)).unwrap();
        match rule {
            ThresholdRule::Mixture { lower, upper, p_lower } => {
                assert_eq!((lower, upper), (f64::NEG_INFINITY, f64::INFINITY));
                assert!((p_lower - 0.3).abs() < 1e-12);
            }
            other => panic!("unexpected rule {other:?}"),
        }
    }

    #[test]
    fn infeasible_target_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dist = random_dist(&mut rng, 6);
        let roc = conditional_roc(&dist, 0).unwrap();
        assert!(matches!(
            point_to_mixture(&roc, RatePoint::new(0.5, 0.2)),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            point_to_mixture(&roc, RatePoint::new(0.0, 1.0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn monte_carlo_application_reproduces_interior_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let dist = random_dist(&mut rng, 12);
        let roc = conditional_roc(&dist, 0).unwrap();
        let region = achievable_region(&roc);
        let target = RatePoint::new(0.35, 0.35 + 0.6 * (region.boundary(0.35) - 0.35));
        let rule = point_to_mixture(&roc, target).unwrap();
        let n = 1_000_000;
        let mut estimate = [0.0; 2];
        for (y, slot) in estimate.iter_mut().enumerate() {
            let cond = dist.conditional(0, y == 1);
            let scores: Vec<(f64, f64)> = cond.iter().collect();
            let mut hits = 0usize;
            for _ in 0..n {
                let mut u: f64 = rng.gen();
                let mut score = scores[scores.len() - 1].0;
                for &(s, m) in &scores {
                    if u < m {
                        score = s;
                        break;
                    }
                    u -= m;
                }
                hits += usize::from(rule.apply(score, &mut rng));
            }
            *slot = hits as f64 / n as f64;
        }
        assert!((estimate[0] - target.fpr).abs() < 0.005);
        assert!((estimate[1] - target.tpr).abs() < 0.005);
    }

    #[test]
    fn rules_serialize_with_sentinels() {
        let rule = ThresholdRule::Mixture { lower: f64::NEG_INFINITY, upper: 600.0, p_lower: 0.25 };
        let json = serde_json::to_string(&rule).unwrap();
        assert_eq!(json, r#"{"kind":"mixture","lower":"-inf","upper":600.0,"p_lower":0.25}"#);
        let back: ThresholdRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rule);
    }
}
