use serde::Serialize;

use super::{cross, RatePoint, RocCurve, CONVEXITY_TOLERANCE};

/// Rates achievable by randomized thresholding within a group: the region
/// between the main diagonal and a concave piecewise-linear upper boundary.
///
/// The boundary vertices run from `(0, 0)` to `(1, 1)` with nondecreasing
/// fpr. A second vertex at fpr 0 encodes a vertical first edge; the boundary
/// function then takes its upper value at fpr 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleRegion {
    vertices: Vec<RatePoint>,
}

/// Indices of the upper concave hull of `points` together with the corners
/// `(0,0)` and `(1,1)`, ordered by increasing fpr. Indices `points.len()` and
/// `points.len() + 1` denote the two corners when they are not in `points`.
///
/// With `keep_collinear`, points lying on a hull edge are retained.
pub fn upper_hull_indices(points: &[RatePoint], keep_collinear: bool) -> Vec<usize> {
    let n = points.len();
    let mut all: Vec<(RatePoint, usize)> = points.iter().copied().zip(0..).collect();
    all.push((RatePoint::ORIGIN, n));
    all.push((RatePoint::ONE, n + 1));
    all.sort_by(|a, b| {
        a.0.fpr.total_cmp(&b.0.fpr).then(a.0.tpr.total_cmp(&b.0.tpr)).then(a.1.cmp(&b.1))
    });
    all.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(RatePoint, usize)> = Vec::with_capacity(all.len());
    for p in all {
        while hull.len() >= 2 {
            let c = cross(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0);
            let drop = if keep_collinear { c > 0.0 } else { c >= 0.0 };
            if drop {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.into_iter().map(|(_, i)| i).collect()
}

impl FeasibleRegion {
    /// Upper concave hull of the points plus the corners.
    pub fn from_points(points: &[RatePoint]) -> Self {
        let lookup = |i: usize| match i.checked_sub(points.len()) {
            None => points[i],
            Some(0) => RatePoint::ORIGIN,
            Some(_) => RatePoint::ONE,
        };
        let vertices = upper_hull_indices(points, false).into_iter().map(lookup).collect();
        Self { vertices }
    }

    /// The zero-area region consisting of the diagonal.
    pub fn diagonal() -> Self {
        Self { vertices: vec![RatePoint::ORIGIN, RatePoint::ONE] }
    }

    pub fn vertices(&self) -> &[RatePoint] {
        &self.vertices
    }

    /// Largest achievable tpr at the given fpr (clamped into `[0, 1]`).
    pub fn boundary(&self, fpr: f64) -> f64 {
        let x = fpr.clamp(0.0, 1.0);
        let v = &self.vertices;
        let idx = v.partition_point(|p| p.fpr <= x);
        if idx == v.len() {
            return v[v.len() - 1].tpr;
        }
        let (a, b) = (v[idx - 1], v[idx]);
        a.tpr + (x - a.fpr) * (b.tpr - a.tpr) / (b.fpr - a.fpr)
    }

    pub fn contains(&self, p: RatePoint, slack: f64) -> bool {
        p.fpr >= -slack
            && p.fpr <= 1.0 + slack
            && p.tpr <= 1.0 + slack
            && p.tpr >= p.fpr - slack
            && p.tpr <= self.boundary(p.fpr) + slack
    }

    pub fn area(&self) -> f64 {
        let under: f64 = self
            .vertices
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum();
        under - 0.5
    }

    /// Anchored at the corners, nondecreasing, above the diagonal, with
    /// nonincreasing slopes.
    pub fn is_valid(&self) -> bool {
        let v = &self.vertices;
        let anchored = v.first() == Some(&RatePoint::ORIGIN) && v.last() == Some(&RatePoint::ONE);
        let monotone = v.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        let above = v.iter().all(|p| p.tpr >= p.fpr - CONVEXITY_TOLERANCE);
        let concave = v.windows(3).all(|w| cross(w[0], w[1], w[2]) <= CONVEXITY_TOLERANCE);
        anchored && monotone && above && concave
    }
}

/// Achievable region of a group's ROC curve.
pub fn achievable_region(roc: &RocCurve) -> FeasibleRegion {
    let points: Vec<RatePoint> = roc.rates().collect();
    FeasibleRegion::from_points(&points)
}

/// Intersection of achievable regions: the pointwise minimum of the upper
/// boundaries, which is again concave.
pub fn intersect_regions(regions: &[FeasibleRegion]) -> FeasibleRegion {
    match regions {
        [] => return FeasibleRegion::diagonal(),
        [only] => return only.clone(),
        _ => {}
    }
    let mut xs: Vec<f64> = regions.iter().flat_map(|r| r.vertices.iter().map(|v| v.fpr)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut crossings = Vec::new();
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let ends: Vec<(f64, f64)> = regions
            .iter()
            .map(|r| (r.boundary(x0), r.boundary(x1)))
            .collect();
        for j in 0..ends.len() {
            for k in j + 1..ends.len() {
                let d0 = ends[j].0 - ends[k].0;
                let d1 = ends[j].1 - ends[k].1;
                if d0 * d1 < 0.0 {
                    crossings.push(x0 + (x1 - x0) * d0 / (d0 - d1));
                }
            }
        }
    }
    xs.extend(crossings);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let min_at = |x: f64| regions.iter().map(|r| r.boundary(x)).fold(f64::INFINITY, f64::min);
    let points: Vec<RatePoint> = xs.iter().map(|&x| RatePoint::new(x, min_at(x))).collect();
    FeasibleRegion::from_points(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_curve(rng: &mut impl Rng, n: usize) -> Vec<RatePoint> {
        let mut xs: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut ys: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        xs.into_iter().zip(ys).map(|(x, y)| RatePoint::new(x, y)).collect()
    }

    fn random_region(rng: &mut impl Rng) -> FeasibleRegion {
        let n = rng.gen_range(1..25);
        FeasibleRegion::from_points(&random_curve(rng, n))
    }

    /// Gift-wrapping over all points: a vertex follows `p` if no other point
    /// lies strictly to its left.
    fn brute_upper_hull(points: &[RatePoint]) -> Vec<RatePoint> {
        let mut all = points.to_vec();
        all.push(RatePoint::ORIGIN);
        all.push(RatePoint::ONE);
        let mut hull = vec![RatePoint::ORIGIN];
        let mut current = RatePoint::ORIGIN;
        while current != RatePoint::ONE {
            let mut best: Option<RatePoint> = None;
            for &q in &all {
                if q.fpr < current.fpr || q == current || (q.fpr == current.fpr && q.tpr <= current.tpr) {
                    continue;
                }
                best = match best {
                    None => Some(q),
                    Some(b) => {
                        let c = cross(current, b, q);
                        if c > 0.0 || (c == 0.0 && current.distance(q) > current.distance(b)) {
                            Some(q)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            current = best.unwrap();
            hull.push(current);
        }
        hull
    }

    #[test]
    fn diagonal_and_perfect_curves() {
        let diag = FeasibleRegion::from_points(&[RatePoint::ORIGIN, RatePoint::ONE]);
        assert_eq!(diag, FeasibleRegion::diagonal());
        assert_eq!(diag.area(), 0.0);

        let perfect = FeasibleRegion::from_points(&[RatePoint::new(0.0, 1.0)]);
        assert_eq!(perfect.vertices(), &[RatePoint::ORIGIN, RatePoint::new(0.0, 1.0), RatePoint::ONE]);
        assert_eq!(perfect.area(), 0.5);
        assert_eq!(perfect.boundary(0.0), 1.0);
        assert!(perfect.is_valid());
    }

    #[test]
    fn points_below_the_diagonal_are_ignored() {
        let region = FeasibleRegion::from_points(&[RatePoint::new(0.6, 0.2)]);
        assert_eq!(region, FeasibleRegion::diagonal());
    }

    #[test]
    fn hull_matches_gift_wrapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let pts = random_curve(&mut rng, 20);
            let region = FeasibleRegion::from_points(&pts);
            assert!(region.is_valid());
            assert_eq!(region.vertices(), brute_upper_hull(&pts).as_slice());
        }
    }

    #[test]
    fn intersection_is_pointwise_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_region(&mut rng);
            let b = random_region(&mut rng);
            let both = intersect_regions(&[a.clone(), b.clone()]);
            assert!(both.is_valid());
            for _ in 0..1000 {
                let x: f64 = rng.gen();
                let expected = a.boundary(x).min(b.boundary(x));
                assert!((both.boundary(x) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn intersection_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_region(&mut rng);
        assert_eq!(intersect_regions(&[a.clone(), a.clone()]), a);
        assert_eq!(intersect_regions(&[a, FeasibleRegion::diagonal()]), FeasibleRegion::diagonal());
    }

    fn max_gap(a: &FeasibleRegion, b: &FeasibleRegion) -> f64 {
        (0..=2000)
            .map(|i| i as f64 / 2000.0)
            .map(|x| (a.boundary(x) - b.boundary(x)).abs())
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn intersection_algebra(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_region(&mut rng), random_region(&mut rng), random_region(&mut rng));
            let ab = intersect_regions(&[a.clone(), b.clone()]);
            let ba = intersect_regions(&[b.clone(), a.clone()]);
            prop_assert!(max_gap(&ab, &ba) < 1e-12);
            let left = intersect_regions(&[ab, c.clone()]);
            let right = intersect_regions(&[a.clone(), intersect_regions(&[b, c])]);
            prop_assert!(max_gap(&left, &right) < 1e-12);
            prop_assert!(max_gap(&intersect_regions(&[a.clone(), a.clone()]), &a) < 1e-15);
            prop_assert!(left.is_valid());
        }
    }
}
