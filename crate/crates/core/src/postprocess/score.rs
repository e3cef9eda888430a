use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ternary_search, Criterion, CONSTRAINT_TOLERANCE};
use crate::error::{Error, Result};
use crate::geometry::{
    achievable_region, conditional_roc, intersect_regions, point_to_mixture, FeasibleRegion,
    RocCurve, ThresholdRule,
};
use crate::joint::{ConditionalScoreDistribution, JointBinaryDistribution, LossSpec, RatePoint};

/// Losses closer than this are treated as tied.
const TIE: f64 = 1e-12;

/// One threshold rule per group, indexed by group id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomizedThresholdPolicy {
    pub rules: Vec<ThresholdRule>,
}

impl RandomizedThresholdPolicy {
    pub fn new(rules: Vec<ThresholdRule>) -> Self {
        Self { rules }
    }

    pub fn group_count(&self) -> usize {
        self.rules.len()
    }

    pub fn is_randomized(&self) -> bool {
        self.rules.iter().any(ThresholdRule::is_randomized)
    }

    fn check(&self, dist: &ConditionalScoreDistribution) -> Result<()> {
        if self.group_count() == dist.group_count() {
            Ok(())
        } else {
            Err(Error::StructureMismatch)
        }
    }
}

/// Search bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchDiagnostics {
    pub method: String,
    pub iterations: usize,
    /// Value of the searched coordinate at the optimum (fpr, tpr or
    /// acceptance rate), when there is one.
    pub coordinate: Option<f64>,
    /// Breakpoints of the piecewise-linear objective considered when
    /// snapping the search result.
    pub breakpoints: usize,
}

/// A policy together with what it achieves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyReport {
    pub criterion: Criterion,
    pub groups: Vec<String>,
    pub policy: RandomizedThresholdPolicy,
    /// `(fpr, tpr)` per group.
    pub rates: Vec<RatePoint>,
    /// `Pr{Ỹ=1 | A=a}` per group.
    pub acceptance: Vec<f64>,
    /// Expected within-group score percentile of the threshold, i.e. one
    /// minus the acceptance rate.
    pub percentiles: Vec<f64>,
    pub loss: f64,
    /// Largest violation of the criterion's equality constraints.
    pub residual: f64,
    pub tolerance: f64,
    pub satisfied: bool,
    /// Some group randomizes between two thresholds.
    pub randomized: bool,
    /// Some group also accepts below its lower threshold with positive
    /// probability; needed for rate points strictly inside a region.
    pub floored: bool,
    pub notes: Vec<String>,
    pub diagnostics: SearchDiagnostics,
}

impl PolicyReport {
    /// Joint table of the binary decision `Ỹ`, the group and the outcome.
    pub fn derived_joint(&self, dist: &ConditionalScoreDistribution) -> Result<JointBinaryDistribution> {
        derived_joint(dist, &self.policy)
    }
}

/// Draws the decision for one individual.
pub fn apply_policy(
    policy: &RandomizedThresholdPolicy,
    score: f64,
    group: usize,
    rng: &mut impl Rng,
) -> Result<bool> {
    let rule = policy.rules.get(group).ok_or(Error::UnknownGroup(group))?;
    Ok(rule.apply(score, rng))
}

/// Exact `(fpr, tpr)` of each group under the policy.
pub fn policy_rates(
    dist: &ConditionalScoreDistribution,
    policy: &RandomizedThresholdPolicy,
) -> Result<Vec<RatePoint>> {
    policy.check(dist)?;
    Ok(policy.rules.iter().enumerate().map(|(a, rule)| rule.rates(dist, a)).collect())
}

/// Exact expected loss of the policy.
pub fn policy_loss(
    dist: &ConditionalScoreDistribution,
    policy: &RandomizedThresholdPolicy,
    loss: &LossSpec,
) -> Result<f64> {
    Ok(total_loss(dist, loss, &policy_rates(dist, policy)?))
}

/// Joint table of `(Ỹ, A, Y)` induced by the policy.
pub fn derived_joint(
    dist: &ConditionalScoreDistribution,
    policy: &RandomizedThresholdPolicy,
) -> Result<JointBinaryDistribution> {
    let rates = policy_rates(dist, policy)?;
    let cells = rates
        .iter()
        .enumerate()
        .map(|(a, r)| {
            let neg = dist.group_outcome_mass(a, false);
            let pos = dist.group_outcome_mass(a, true);
            let (fpr, tpr) = (r.fpr.clamp(0.0, 1.0), r.tpr.clamp(0.0, 1.0));
            [[neg * (1.0 - fpr), pos * (1.0 - tpr)], [neg * fpr, pos * tpr]]
        })
        .collect();
    JointBinaryDistribution::from_weights(dist.group_names().to_vec(), cells)
}

/// Dispatches on the criterion.
pub fn optimize(
    dist: &ConditionalScoreDistribution,
    criterion: Criterion,
    loss: &LossSpec,
) -> Result<PolicyReport> {
    match criterion {
        Criterion::MaxProfit => optimize_max_profit(dist, loss),
        Criterion::GroupBlind => optimize_group_blind(dist, loss),
        Criterion::DemographicParity => optimize_demographic_parity(dist, loss),
        Criterion::EqualOpportunity => optimize_equal_opportunity(dist, loss),
        Criterion::EqualizedOdds => optimize_equalized_odds(dist, loss),
    }
}

/// Best threshold for each group on its own.
pub fn optimize_max_profit(dist: &ConditionalScoreDistribution, loss: &LossSpec) -> Result<PolicyReport> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let curves = curves(dist)?;
    let mut examined = 0;
    let rules = curves
        .iter()
        .enumerate()
        .map(|(a, roc)| {
            examined += roc.len();
            // Points run from high to low threshold, so the first minimum
            // has the smallest fpr. Comparisons are exact so that no shared
            // threshold can beat the per-group choice.
            let mut best = (f64::INFINITY, f64::INFINITY);
            for p in roc.points() {
                let value = group_loss(dist, &loss, a, p.rates());
                if value < best.0 {
                    best = (value, p.threshold);
                }
            }
            ThresholdRule::Fixed { threshold: best.1 }
        })
        .collect();
    let diagnostics = SearchDiagnostics {
        method: "per-group threshold sweep".into(),
        iterations: 0,
        coordinate: None,
        breakpoints: examined,
    };
    report(dist, &loss, Criterion::MaxProfit, RandomizedThresholdPolicy::new(rules), diagnostics)
}

/// Best single threshold shared by all groups.
pub fn optimize_group_blind(dist: &ConditionalScoreDistribution, loss: &LossSpec) -> Result<PolicyReport> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let support = dist.pooled_support();
    let thresholds = std::iter::once(f64::INFINITY)
        .chain(support.iter().rev().copied())
        .chain(std::iter::once(f64::NEG_INFINITY));
    let mut best = (f64::INFINITY, f64::INFINITY);
    for t in thresholds {
        let rates: Vec<RatePoint> = (0..dist.group_count()).map(|a| dist.rates_at(a, t)).collect();
        let value = total_loss(dist, &loss, &rates);
        if value < best.0 {
            best = (value, t);
        }
    }
    let rules = vec![ThresholdRule::Fixed { threshold: best.1 }; dist.group_count()];
    let diagnostics = SearchDiagnostics {
        method: "pooled threshold sweep".into(),
        iterations: 0,
        coordinate: None,
        breakpoints: support.len() + 2,
    };
    report(dist, &loss, Criterion::GroupBlind, RandomizedThresholdPolicy::new(rules), diagnostics)
}

/// Loss-optimal policy with equal `(fpr, tpr)` across groups.
///
/// The common rate point is searched on the upper boundary of the
/// intersection of the groups' achievable regions, parameterized by fpr;
/// there the loss is convex and piecewise linear. The ternary-search result
/// is snapped to the best nearby boundary vertex.
pub fn optimize_equalized_odds(
    dist: &ConditionalScoreDistribution,
    loss: &LossSpec,
) -> Result<PolicyReport> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let curves = curves(dist)?;
    let regions: Vec<FeasibleRegion> = curves.iter().map(achievable_region).collect();
    let common = intersect_regions(&regions);
    let negatives = dist.outcome_mass(false);
    let positives = dist.outcome_mass(true);
    let objective =
        |x: f64| loss.group_loss(negatives, positives, RatePoint::new(x, common.boundary(x)));
    let breaks: Vec<f64> = common.vertices().iter().map(|v| v.fpr).collect();
    let (x, iterations) = minimize_piecewise_linear(breaks.clone(), objective);
    let target = RatePoint::new(x, common.boundary(x));
    let rules = curves
        .iter()
        .map(|roc| point_to_mixture(roc, target))
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = SearchDiagnostics {
        method: "ternary search on the intersected boundary".into(),
        iterations,
        coordinate: Some(x),
        breakpoints: breaks.len(),
    };
    report(dist, &loss, Criterion::EqualizedOdds, RandomizedThresholdPolicy::new(rules), diagnostics)
}

/// Loss-optimal policy with equal true positive rates.
///
/// At a common tpr `ν` each group uses the leftmost point of its region at
/// height `ν`. That fpr is convex in `ν`, so the total loss is convex and
/// ternary search over `ν` applies.
pub fn optimize_equal_opportunity(
    dist: &ConditionalScoreDistribution,
    loss: &LossSpec,
) -> Result<PolicyReport> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let curves = curves(dist)?;
    let regions: Vec<FeasibleRegion> = curves.iter().map(achievable_region).collect();
    let points_at = |nu: f64| -> Vec<RatePoint> {
        regions.iter().map(|r| RatePoint::new(leftmost_at_height(r, nu), nu)).collect()
    };
    let objective = |nu: f64| total_loss(dist, &loss, &points_at(nu));
    let breaks: Vec<f64> = regions.iter().flat_map(|r| r.vertices().iter().map(|v| v.tpr)).collect();
    let (nu, iterations) = minimize_piecewise_linear(breaks.clone(), objective);
    let rules = curves
        .iter()
        .zip(points_at(nu))
        .map(|(roc, target)| point_to_mixture(roc, target))
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = SearchDiagnostics {
        method: "ternary search over the common true positive rate".into(),
        iterations,
        coordinate: Some(nu),
        breakpoints: breaks.len(),
    };
    report(dist, &loss, Criterion::EqualOpportunity, RandomizedThresholdPolicy::new(rules), diagnostics)
}

/// Loss-optimal policy with equal acceptance rates.
///
/// At a common acceptance rate each group's best rate point is where its
/// region boundary meets the line of that acceptance rate; the total loss is
/// convex in the rate.
pub fn optimize_demographic_parity(
    dist: &ConditionalScoreDistribution,
    loss: &LossSpec,
) -> Result<PolicyReport> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let curves = curves(dist)?;
    let regions: Vec<FeasibleRegion> = curves.iter().map(achievable_region).collect();
    let points_at = |beta: f64| -> Vec<RatePoint> {
        regions
            .iter()
            .enumerate()
            .map(|(a, r)| point_at_acceptance(r, dist.base_rate(a), beta))
            .collect()
    };
    let objective = |beta: f64| total_loss(dist, &loss, &points_at(beta));
    let breaks: Vec<f64> = regions
        .iter()
        .enumerate()
        .flat_map(|(a, r)| r.vertices().iter().map(move |&v| dist.acceptance_of(a, v)))
        .collect();
    let (beta, iterations) = minimize_piecewise_linear(breaks.clone(), objective);
    let rules = curves
        .iter()
        .zip(points_at(beta))
        .map(|(roc, target)| point_to_mixture(roc, target))
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = SearchDiagnostics {
        method: "ternary search over the common acceptance rate".into(),
        iterations,
        coordinate: Some(beta),
        breakpoints: breaks.len(),
    };
    report(dist, &loss, Criterion::DemographicParity, RandomizedThresholdPolicy::new(rules), diagnostics)
}

fn curves(dist: &ConditionalScoreDistribution) -> Result<Vec<RocCurve>> {
    (0..dist.group_count()).map(|a| conditional_roc(dist, a)).collect()
}

fn group_loss(dist: &ConditionalScoreDistribution, loss: &LossSpec, group: usize, rates: RatePoint) -> f64 {
    loss.group_loss(dist.group_outcome_mass(group, false), dist.group_outcome_mass(group, true), rates)
}

fn total_loss(dist: &ConditionalScoreDistribution, loss: &LossSpec, rates: &[RatePoint]) -> f64 {
    rates.iter().enumerate().map(|(a, &r)| group_loss(dist, loss, a, r)).sum()
}

/// Smallest fpr on the region boundary with tpr at least `nu`.
fn leftmost_at_height(region: &FeasibleRegion, nu: f64) -> f64 {
    let v = region.vertices();
    if nu <= 0.0 {
        return 0.0;
    }
    let idx = v.partition_point(|p| p.tpr < nu).min(v.len() - 1);
    let (a, b) = (v[idx - 1], v[idx]);
    a.fpr + (nu - a.tpr) / (b.tpr - a.tpr) * (b.fpr - a.fpr)
}

/// The boundary point with acceptance rate `beta` in a group with base
/// rate `base`. Acceptance is strictly increasing along the boundary.
fn point_at_acceptance(region: &FeasibleRegion, base: f64, beta: f64) -> RatePoint {
    let v = region.vertices();
    let accept = |p: RatePoint| (1.0 - base) * p.fpr + base * p.tpr;
    if beta <= 0.0 {
        return RatePoint::ORIGIN;
    }
    let idx = v.partition_point(|&p| accept(p) < beta).min(v.len() - 1);
    let (a, b) = (v[idx - 1], v[idx]);
    let w = (beta - accept(a)) / (accept(b) - accept(a));
    a.lerp(b, w.clamp(0.0, 1.0))
}

/// Minimizes a convex piecewise-linear function on `[0, 1]` whose kinks
/// lie in `breaks`: ternary search, then the best of the nearby kinks,
/// moving left across ties.
fn minimize_piecewise_linear(mut breaks: Vec<f64>, f: impl Fn(f64) -> f64) -> (f64, usize) {
    breaks.extend([0.0, 1.0]);
    breaks.retain(|b| (0.0..=1.0).contains(b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (x, iterations) = ternary_search(0.0, 1.0, &f);
    let idx = breaks.partition_point(|&b| b < x);
    let lo = idx.saturating_sub(2);
    let hi = (idx + 2).min(breaks.len());
    let mut best = (f(x), x, None);
    for (i, &b) in breaks.iter().enumerate().take(hi).skip(lo) {
        let value = f(b);
        if value < best.0 - TIE || (value <= best.0 + TIE && b < best.1) {
            best = (value, b, Some(i));
        }
    }
    if let Some(mut i) = best.2 {
        while i > 0 && f(breaks[i - 1]) <= best.0 + TIE {
            i -= 1;
        }
        best.1 = breaks[i];
    }
    (best.1, iterations)
}

fn report(
    dist: &ConditionalScoreDistribution,
    loss: &LossSpec,
    criterion: Criterion,
    policy: RandomizedThresholdPolicy,
    diagnostics: SearchDiagnostics,
) -> Result<PolicyReport> {
    let rates = policy_rates(dist, &policy)?;
    let acceptance: Vec<f64> = rates.iter().enumerate().map(|(a, &r)| dist.acceptance_of(a, r)).collect();
    let residual = criterion_residual(criterion, &policy, &rates, &acceptance);
    let randomized = policy.is_randomized();
    let floored = policy.rules.iter().any(|r| matches!(r, ThresholdRule::Floored { .. }));
    let mut notes = Vec::new();
    if randomized && criterion != Criterion::EqualizedOdds {
        notes.push(
            "score atoms prevent an exact fixed-threshold solution; some groups randomize between adjacent thresholds"
                .to_string(),
        );
    }
    if floored {
        notes.push(
            "target rates lie strictly inside a group's achievable region; that group also accepts below its lower threshold with probability p_floor"
                .to_string(),
        );
    }
    Ok(PolicyReport {
        criterion,
        groups: dist.group_names().to_vec(),
        loss: total_loss(dist, loss, &rates),
        percentiles: acceptance.iter().map(|a| 1.0 - a).collect(),
        satisfied: residual <= CONSTRAINT_TOLERANCE,
        tolerance: CONSTRAINT_TOLERANCE,
        residual,
        rates,
        acceptance,
        policy,
        randomized,
        floored,
        notes,
        diagnostics,
    })
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    (max - min).max(0.0)
}

fn criterion_residual(
    criterion: Criterion,
    policy: &RandomizedThresholdPolicy,
    rates: &[RatePoint],
    acceptance: &[f64],
) -> f64 {
    match criterion {
        Criterion::MaxProfit => 0.0,
        Criterion::GroupBlind => {
            let first = policy.rules.first();
            if policy.rules.iter().all(|r| Some(r) == first) {
                0.0
            } else {
                1.0
            }
        }
        Criterion::DemographicParity => spread(acceptance.iter().copied()),
        Criterion::EqualOpportunity => spread(rates.iter().map(|r| r.tpr)),
        Criterion::EqualizedOdds => {
            spread(rates.iter().map(|r| r.fpr)).max(spread(rates.iter().map(|r| r.tpr)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{estimate_score_distribution, ScoreSample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two groups on a shared grid of `support` scores; higher scores lean
    /// positive, more strongly in group 0.
    fn random_dist(rng: &mut impl Rng, support: usize) -> ConditionalScoreDistribution {
        let mut samples = Vec::new();
        for group in 0..2 {
            let strength = if group == 0 { 3.0 } else { 1.0 };
            for k in 0..support {
                let s = k as f64 / support as f64;
                for outcome in [false, true] {
                    if rng.gen_bool(0.8) || k == 0 || k == support - 1 {
                        let tilt = if outcome { (strength * s).exp() } else { (-strength * s).exp() };
                        samples.push(ScoreSample::new(group, s, outcome, tilt * (0.1 + rng.gen::<f64>())));
                    }
                }
            }
        }
        estimate_score_distribution(&samples).unwrap()
    }

    fn all_losses(rng: &mut impl Rng) -> LossSpec {
        LossSpec::new(0.1 + rng.gen::<f64>(), 0.1 + rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn identical_groups_reduce_to_max_profit() {
        let mut samples = Vec::new();
        for group in 0..2 {
            for (s, y, w) in [(0.1, false, 3.0), (0.4, false, 2.0), (0.4, true, 1.0), (0.8, true, 3.0), (0.8, false, 1.0)] {
                samples.push(ScoreSample::new(group, s, y, w * (1.0 + group as f64)));
            }
        }
        let dist = estimate_score_distribution(&samples).unwrap();
        let loss = LossSpec::new(1.0, 1.0).unwrap();
        let best = optimize_max_profit(&dist, &loss).unwrap();
        for criterion in Criterion::ALL {
            let other = optimize(&dist, criterion, &loss).unwrap();
            assert!((other.loss - best.loss).abs() < 1e-12, "{criterion}");
            assert_eq!(other.policy, best.policy, "{criterion}");
        }
    }

    #[test]
    fn noise_group_forces_constant_predictor() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut samples = Vec::new();
        for k in 0..20 {
            let s = k as f64;
            samples.push(ScoreSample::new(0, s, k >= 10, 1.0 + rng.gen::<f64>()));
            for y in [false, true] {
                samples.push(ScoreSample::new(1, s, y, 1.0));
            }
        }
        let dist = estimate_score_distribution(&samples).unwrap();
        let loss = LossSpec::new(1.0, 2.0).unwrap();
        let result = optimize_equalized_odds(&dist, &loss).unwrap();
        assert!((result.rates[0].fpr - result.rates[0].tpr).abs() < 1e-12);
        let constant = (loss.cost_fn * dist.outcome_mass(true)).min(loss.cost_fp * dist.outcome_mass(false));
        assert!((result.loss - constant).abs() < 1e-12);
    }

    #[test]
    fn separable_score_has_zero_max_profit_loss() {
        let samples: Vec<_> = (0..2)
            .flat_map(|a| [ScoreSample::new(a, 1.0, false, 1.0), ScoreSample::new(a, 2.0, true, 1.0)])
            .collect();
        let dist = estimate_score_distribution(&samples).unwrap();
        let report = optimize_max_profit(&dist, &LossSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(report.loss, 0.0);
        assert_eq!(report.policy.rules[0], ThresholdRule::Fixed { threshold: 1.0 });
        let eo = optimize_equalized_odds(&dist, &LossSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(eo.loss, 0.0);
    }

    /// Minimum of the objective over all kinks.
    fn vertex_minimum(breaks: Vec<f64>, f: impl Fn(f64) -> f64) -> f64 {
        breaks.into_iter().chain([0.0, 1.0]).map(f).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn searches_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let dist = random_dist(&mut rng, 20);
            let loss = all_losses(&mut rng);
            let regions: Vec<FeasibleRegion> =
                (0..2).map(|a| achievable_region(&conditional_roc(&dist, a).unwrap())).collect();

            let common = intersect_regions(&regions);
            let f = |x: f64| {
                loss.group_loss(dist.outcome_mass(false), dist.outcome_mass(true), RatePoint::new(x, common.boundary(x)))
            };
            let oracle = vertex_minimum(common.vertices().iter().map(|v| v.fpr).collect(), f);
            let eo = optimize_equalized_odds(&dist, &loss).unwrap();
            assert!((eo.loss - oracle).abs() < 1e-9);
            assert!(eo.residual < 1e-9);

            let f = |nu: f64| {
                let pts: Vec<_> = regions.iter().map(|r| RatePoint::new(leftmost_at_height(r, nu), nu)).collect();
                total_loss(&dist, &loss, &pts)
            };
            let oracle = vertex_minimum(regions.iter().flat_map(|r| r.vertices().iter().map(|v| v.tpr)).collect(), f);
            let opp = optimize_equal_opportunity(&dist, &loss).unwrap();
            assert!((opp.loss - oracle).abs() < 1e-9);
            assert!(opp.residual < 1e-9);

            let f = |beta: f64| {
                let pts: Vec<_> = regions
                    .iter()
                    .enumerate()
                    .map(|(a, r)| point_at_acceptance(r, dist.base_rate(a), beta))
                    .collect();
                total_loss(&dist, &loss, &pts)
            };
            let breaks = regions
                .iter()
                .enumerate()
                .flat_map(|(a, r)| r.vertices().iter().map(|&v| dist.acceptance_of(a, v)).collect::<Vec<_>>())
                .collect();
            let oracle = vertex_minimum(breaks, f);
            let parity = optimize_demographic_parity(&dist, &loss).unwrap();
            assert!((parity.loss - oracle).abs() < 1e-9);
            assert!(parity.residual < 1e-9);
        }
    }

    #[test]
    fn loss_ordering_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let dist = random_dist(&mut rng, 15);
            let loss = all_losses(&mut rng);
            let l = |c| optimize(&dist, c, &loss).unwrap().loss;
            let (mp, gb, dp, opp, eo) = (
                l(Criterion::MaxProfit),
                l(Criterion::GroupBlind),
                l(Criterion::DemographicParity),
                l(Criterion::EqualOpportunity),
                l(Criterion::EqualizedOdds),
            );
            assert!(mp <= gb && mp <= dp + 1e-12 && mp <= opp + 1e-12);
            assert!(opp <= eo + 1e-12);
        }
    }

    #[test]
    fn fixed_thresholds_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let dist = random_dist(&mut rng, 25);
        let support = dist.group_support(0);
        for w in support.windows(2) {
            let lo = dist.rates_at(0, w[0]);
            let hi = dist.rates_at(0, w[1]);
            assert!(hi.fpr <= lo.fpr && hi.tpr <= lo.tpr);
        }
    }

    #[test]
    fn equalized_odds_policy_under_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let dist = random_dist(&mut rng, 12);
        let loss = LossSpec::new(0.82, 0.18).unwrap();
        let report = optimize_equalized_odds(&dist, &loss).unwrap();
        let n = 200_000;
        for a in 0..2 {
            for y in [false, true] {
                let cond = dist.conditional(a, y);
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
                    hits += usize::from(apply_policy(&report.policy, score, a, &mut rng).unwrap());
                }
                let exact = if y { report.rates[a].tpr } else { report.rates[a].fpr };
                let sigma = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-6);
                assert!((hits as f64 / n as f64 - exact).abs() < 3.5 * sigma);
            }
        }
    }

    #[test]
    fn apply_policy_gap_frequency() {
        let policy = RandomizedThresholdPolicy::new(vec![ThresholdRule::Mixture {
            lower: 0.2,
            upper: 0.6,
            p_lower: 0.25,
        }]);
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        assert!(apply_policy(&policy, 0.7, 0, &mut rng).unwrap());
        assert!(!apply_policy(&policy, 0.2, 0, &mut rng).unwrap());
        let n = 1_000_000;
        let hits = (0..n).filter(|_| apply_policy(&policy, 0.4, 0, &mut rng).unwrap()).count();
        assert!((hits as f64 / n as f64 - 0.25).abs() < 0.002);
        assert!(matches!(apply_policy(&policy, 0.4, 1, &mut rng), Err(Error::UnknownGroup(1))));
        let fixed = RandomizedThresholdPolicy::new(vec![ThresholdRule::Fixed { threshold: 0.5 }]);
        assert!(apply_policy(&fixed, 0.51, 0, &mut rng).unwrap());
        assert!(!apply_policy(&fixed, 0.5, 0, &mut rng).unwrap());
    }

    #[test]
    fn closed_loop_constraints_hold_on_derived_joint() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..30 {
            let dist = random_dist(&mut rng, 10);
            let loss = all_losses(&mut rng);
            for criterion in [Criterion::EqualizedOdds, Criterion::EqualOpportunity, Criterion::DemographicParity] {
                let report = optimize(&dist, criterion, &loss).unwrap();
                assert!(report.satisfied);
                let joint = report.derived_joint(&dist).unwrap();
                let g: Vec<RatePoint> = (0..2).map(|a| joint.gamma(a).unwrap()).collect();
                match criterion {
                    Criterion::EqualizedOdds => assert!(g[0].distance(g[1]) < 1e-9),
                    Criterion::EqualOpportunity => assert!((g[0].tpr - g[1].tpr).abs() < 1e-9),
                    _ => assert!((joint.acceptance_rate(0) - joint.acceptance_rate(1)).abs() < 1e-9),
                }
            }
        }
    }
}
