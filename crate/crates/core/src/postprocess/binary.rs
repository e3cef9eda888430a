use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{randomization, Criterion};
use crate::error::{Error, Result};
use crate::geometry::{binary_polytope, ConvexPolygon, FEASIBILITY_SLACK};
use crate::joint::{JointBinaryDistribution, LossSpec, RatePoint};

/// Losses closer than this are treated as tied.
const TIE: f64 = 1e-12;

/// Derived predictor of a binary `Ŷ`: `p[ŷ][a] = Pr{Ỹ=1 | Ŷ=ŷ, A=a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedBinaryPredictor {
    pub p: [Vec<f64>; 2],
}

impl DerivedBinaryPredictor {
    pub fn new(p: [Vec<f64>; 2]) -> Result<Self> {
        if p[0].len() != p[1].len() {
            return Err(Error::invalid("derived predictor needs both rows for every group"));
        }
        if let Some(bad) = p.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("probability {bad} outside [0, 1]")));
        }
        Ok(Self { p })
    }

    /// `Ỹ = Ŷ` for every group.
    pub fn identity(groups: usize) -> Self {
        Self { p: [vec![0.0; groups], vec![1.0; groups]] }
    }

    pub fn group_count(&self) -> usize {
        self.p[0].len()
    }

    pub fn probability(&self, prediction: bool, group: usize) -> f64 {
        self.p[usize::from(prediction)][group]
    }

    /// `γ_a(Ỹ) = p[1][a] γ_a(Ŷ) + p[0][a] γ_a(1-Ŷ)` for every group.
    pub fn rates(&self, joint: &JointBinaryDistribution) -> Result<Vec<RatePoint>> {
        self.check_groups(joint)?;
        (0..joint.group_count())
            .map(|a| Ok(derived_rates(joint.gamma(a)?, self.p[0][a], self.p[1][a])))
            .collect()
    }

    /// Joint table of `(Ỹ, A, Y)`.
    pub fn derived_joint(&self, joint: &JointBinaryDistribution) -> Result<JointBinaryDistribution> {
        self.check_groups(joint)?;
        let cells = (0..joint.group_count())
            .map(|a| {
                let mut out = [[0.0; 2]; 2];
                for y in 0..2 {
                    let outcome = y == 1;
                    let accepted: f64 = [false, true]
                        .into_iter()
                        .map(|pred| self.probability(pred, a) * joint.cell(a, pred, outcome))
                        .sum();
                    let mass = joint.group_outcome_mass(a, outcome);
                    out[1][y] = accepted.clamp(0.0, mass);
                    out[0][y] = mass - out[1][y];
                }
                out
            })
            .collect();
        JointBinaryDistribution::from_weights(joint.group_names().to_vec(), cells)
    }

    fn check_groups(&self, joint: &JointBinaryDistribution) -> Result<()> {
        if self.group_count() != joint.group_count() {
            return Err(Error::StructureMismatch);
        }
        Ok(())
    }
}

/// Solver bookkeeping reported alongside a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub method: String,
    pub candidates: usize,
    /// Largest pairwise gap in the constrained rate coordinates.
    pub constraint_residual: f64,
    /// `Pr{A=a, Y=y}` per group, for judging how balanced the input is.
    pub group_outcome_mass: Vec<[f64; 2]>,
}

/// Outcome of a binary adjustment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustmentResult {
    pub criterion: Criterion,
    pub groups: Vec<String>,
    pub predictor: DerivedBinaryPredictor,
    /// `γ_a(Ỹ)` per group.
    pub rates: Vec<RatePoint>,
    pub loss: f64,
    /// Loss of the unadjusted predictor.
    pub input_loss: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Exact expected loss `Σ ℓ(y, ŷ') Pr{Ỹ=ŷ', Y=y}`, summed cell by cell.
pub fn expected_loss(
    joint: &JointBinaryDistribution,
    pred: &DerivedBinaryPredictor,
    loss: &LossSpec,
) -> f64 {
    let mut total = 0.0;
    for a in 0..joint.group_count() {
        for prediction in [false, true] {
            let p = pred.probability(prediction, a);
            total += loss.cost_fp * joint.cell(a, prediction, false) * p;
            total += loss.cost_fn * joint.cell(a, prediction, true) * (1.0 - p);
        }
    }
    total
}

/// Draws `Ỹ` for one individual.
pub fn apply_derived(
    pred: &DerivedBinaryPredictor,
    prediction: bool,
    group: usize,
    rng: &mut impl Rng,
) -> Result<bool> {
    if group >= pred.group_count() {
        return Err(Error::UnknownGroup(group));
    }
    let p = pred.probability(prediction, group);
    Ok(if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.gen::<f64>() < p
    })
}

/// Dispatches on the criterion; only the two rate-based criteria apply to a
/// binary predictor.
pub fn derive(
    joint: &JointBinaryDistribution,
    criterion: Criterion,
    loss: &LossSpec,
) -> Result<AdjustmentResult> {
    match criterion {
        Criterion::EqualizedOdds => derive_equalized_odds(joint, loss),
        Criterion::EqualOpportunity => derive_equal_opportunity(joint, loss),
        other => Err(Error::invalid(format!(
            "criterion {other} is not supported for binary predictors"
        ))),
    }
}

/// Loss-optimal derived predictor with equal `γ_a(Ỹ)` across groups.
///
/// The loss is linear in the common rate point, so the optimum is a vertex
/// of the intersection of the groups' polytopes. Candidates are the
/// polytope vertices and all pairwise edge crossings.
pub fn derive_equalized_odds(
    joint: &JointBinaryDistribution,
    loss: &LossSpec,
) -> Result<AdjustmentResult> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let polys = polytopes(joint)?;
    let gammas = gammas(joint)?;
    let negatives = joint.outcome_mass(false);
    let positives = joint.outcome_mass(true);
    let objective = |g: RatePoint| loss.group_loss(negatives, positives, g);

    let mut candidates: Vec<RatePoint> = polys.iter().flat_map(|p| p.vertices().to_vec()).collect();
    for (i, pi) in polys.iter().enumerate() {
        for pj in &polys[i + 1..] {
            for (a, b) in pi.edges() {
                for (c, d) in pj.edges() {
                    candidates.extend(segment_crossing(a, b, c, d));
                }
            }
        }
    }
    let examined = candidates.len();

    let mut best: Option<(f64, f64, f64, RatePoint)> = None;
    for g in candidates {
        if !polys.iter().all(|p| p.contains(g, FEASIBILITY_SLACK)) {
            continue;
        }
        let value = objective(g);
        let mix: f64 = gammas
            .iter()
            .map(|&gamma| {
                let [p0, p1] = solve_parameters(gamma, g);
                randomization(p0) + randomization(p1)
            })
            .sum();
        let better = match best {
            None => true,
            Some((v, f, m, _)) => {
                value < v - TIE
                    || (value <= v + TIE && (g.fpr < f - TIE || (g.fpr <= f + TIE && mix < m - TIE)))
            }
        };
        if better {
            best = Some((value, g.fpr, mix, g));
        }
    }
    // The diagonal lies in every polytope, so (0,0) always qualifies.
    let (_, _, _, target) = best.expect("origin is always feasible");
    let targets = vec![target; gammas.len()];
    finish(joint, &loss, Criterion::EqualizedOdds, &gammas, &targets, examined)
}

/// Loss-optimal derived predictor with equal true positive rates.
///
/// For a common tpr `ν` each group takes the leftmost point of its polytope
/// at height `ν`; the total loss is then convex and piecewise linear in `ν`
/// with breakpoints at polytope vertex heights, which are enumerated.
pub fn derive_equal_opportunity(
    joint: &JointBinaryDistribution,
    loss: &LossSpec,
) -> Result<AdjustmentResult> {
    let loss = LossSpec::new(loss.cost_fp, loss.cost_fn)?;
    let polys = polytopes(joint)?;
    let gammas = gammas(joint)?;
    let mut heights: Vec<f64> = polys.iter().flat_map(|p| p.vertices().iter().map(|v| v.tpr)).collect();
    heights.extend([0.0, 1.0]);
    heights.sort_by(f64::total_cmp);
    heights.dedup();

    let mut best: Option<(f64, f64, f64, Vec<RatePoint>)> = None;
    for &nu in &heights {
        let points: Vec<RatePoint> = polys
            .iter()
            .map(|p| RatePoint::new(p.min_fpr_at_tpr(nu).unwrap_or(nu), nu))
            .collect();
        let value: f64 = points
            .iter()
            .enumerate()
            .map(|(a, &g)| {
                loss.group_loss(joint.group_outcome_mass(a, false), joint.group_outcome_mass(a, true), g)
            })
            .sum();
        let fpr: f64 = points.iter().map(|g| g.fpr).sum::<f64>() / points.len() as f64;
        let mix: f64 = gammas
            .iter()
            .zip(&points)
            .map(|(&gamma, &g)| {
                let [p0, p1] = solve_parameters(gamma, g);
                randomization(p0) + randomization(p1)
            })
            .sum();
        let better = match &best {
            None => true,
            Some((v, f, m, _)) => {
                value < v - TIE
                    || (value <= v + TIE && (fpr < f - TIE || (fpr <= f + TIE && mix < m - TIE)))
            }
        };
        if better {
            best = Some((value, fpr, mix, points));
        }
    }
    let (_, _, _, targets) = best.expect("at least the heights 0 and 1 are examined");
    finish(joint, &loss, Criterion::EqualOpportunity, &gammas, &targets, heights.len())
}

fn polytopes(joint: &JointBinaryDistribution) -> Result<Vec<ConvexPolygon>> {
    (0..joint.group_count()).map(|a| binary_polytope(joint, a)).collect()
}

fn gammas(joint: &JointBinaryDistribution) -> Result<Vec<RatePoint>> {
    (0..joint.group_count()).map(|a| joint.gamma(a)).collect()
}

fn derived_rates(gamma: RatePoint, p0: f64, p1: f64) -> RatePoint {
    RatePoint::new(
        p1 * gamma.fpr + p0 * (1.0 - gamma.fpr),
        p1 * gamma.tpr + p0 * (1.0 - gamma.tpr),
    )
}

/// Parameters `[p0, p1]` with `derived_rates(gamma, p0, p1) = target`.
///
/// When `gamma` lies on the diagonal the system is singular; the target is
/// then on the diagonal too and the least randomized solution is returned.
fn solve_parameters(gamma: RatePoint, target: RatePoint) -> [f64; 2] {
    let det = gamma.fpr - gamma.tpr;
    if det.abs() > 1e-12 {
        let d = (target.fpr - target.tpr) / det;
        let p0 = target.fpr - d * gamma.fpr;
        return [p0.clamp(0.0, 1.0), (p0 + d).clamp(0.0, 1.0)];
    }
    // p0 (1 - g) + p1 g = c along the diagonal.
    let g = gamma.fpr;
    let c = (target.fpr + target.tpr) / 2.0;
    let mut options = Vec::new();
    if g > 0.0 {
        for p0 in [0.0, 1.0] {
            options.push([p0, (c - p0 * (1.0 - g)) / g]);
        }
    }
    if g < 1.0 {
        for p1 in [0.0, 1.0] {
            options.push([(c - p1 * g) / (1.0 - g), p1]);
        }
    }
    options
        .into_iter()
        .filter(|[p0, p1]| (-1e-12..=1.0 + 1e-12).contains(p0) && (-1e-12..=1.0 + 1e-12).contains(p1))
        .map(|[p0, p1]| [p0.clamp(0.0, 1.0), p1.clamp(0.0, 1.0)])
        .min_by(|x, y| {
            let rx = randomization(x[0]) + randomization(x[1]);
            let ry = randomization(y[0]) + randomization(y[1]);
            rx.total_cmp(&ry)
        })
        .unwrap_or([c, c])
}

/// Crossing point of segments `[a, b]` and `[c, d]`, if they cross at a
/// single point.
fn segment_crossing(a: RatePoint, b: RatePoint, c: RatePoint, d: RatePoint) -> Option<RatePoint> {
    let r = RatePoint::new(b.fpr - a.fpr, b.tpr - a.tpr);
    let s = RatePoint::new(d.fpr - c.fpr, d.tpr - c.tpr);
    let denom = r.fpr * s.tpr - r.tpr * s.fpr;
    if denom.abs() < 1e-15 {
        return None;
    }
    let q = RatePoint::new(c.fpr - a.fpr, c.tpr - a.tpr);
    let t = (q.fpr * s.tpr - q.tpr * s.fpr) / denom;
    let u = (q.fpr * r.tpr - q.tpr * r.fpr) / denom;
    let range = -1e-12..=1.0 + 1e-12;
    (range.contains(&t) && range.contains(&u)).then(|| a.lerp(b, t.clamp(0.0, 1.0)))
}

fn finish(
    joint: &JointBinaryDistribution,
    loss: &LossSpec,
    criterion: Criterion,
    gammas: &[RatePoint],
    targets: &[RatePoint],
    candidates: usize,
) -> Result<AdjustmentResult> {
    let (p0, p1): (Vec<f64>, Vec<f64>) =
        gammas.iter().zip(targets).map(|(&g, &t)| { let [a, b] = solve_parameters(g, t); (a, b) }).unzip();
    let predictor = DerivedBinaryPredictor::new([p0, p1])?;
    let rates = predictor.rates(joint)?;
    let spread = |f: fn(&RatePoint) -> f64| {
        let values = rates.iter().map(f);
        values.clone().fold(f64::NEG_INFINITY, f64::max) - values.fold(f64::INFINITY, f64::min)
    };
    let constraint_residual = match criterion {
        Criterion::EqualOpportunity => spread(|r| r.tpr),
        _ => spread(|r| r.fpr).max(spread(|r| r.tpr)),
    };
    Ok(AdjustmentResult {
        criterion,
        groups: joint.group_names().to_vec(),
        loss: expected_loss(joint, &predictor, loss),
        input_loss: expected_loss(joint, &DerivedBinaryPredictor::identity(gammas.len()), loss),
        rates,
        predictor,
        diagnostics: SolverDiagnostics {
            method: "polytope vertex enumeration".into(),
            candidates,
            constraint_residual,
            group_outcome_mass: (0..joint.group_count())
                .map(|a| [joint.group_outcome_mass(a, false), joint.group_outcome_mass(a, true)])
                .collect(),
        },
    })
}
