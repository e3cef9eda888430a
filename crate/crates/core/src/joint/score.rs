use serde::Serialize;

use super::{check_weight, default_group_names, GroupLabel, RatePoint, MASS_TOLERANCE};
use crate::error::{Error, Result};

/// One weighted observation of a real-valued score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSample {
    pub group: usize,
    pub score: f64,
    pub outcome: bool,
    pub weight: f64,
}

impl ScoreSample {
    pub fn new(group: usize, score: f64, outcome: bool, weight: f64) -> Self {
        Self { group, score, outcome, weight }
    }
}

/// A discrete distribution on the real line: strictly increasing support
/// points with positive masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    support: Vec<f64>,
    mass: Vec<f64>,
    /// `upper[i]` is the mass at or above `support[i]`; `upper[n] = 0`.
    #[serde(skip)]
    upper: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Builds the distribution from `(value, weight)` pairs, merging equal
    /// values and dropping zero weights.
    pub fn from_weighted(mut points: Vec<(f64, f64)>) -> Result<Self> {
        for &(value, weight) in &points {
            if !value.is_finite() {
                return Err(Error::NonFiniteScore(value));
            }
            check_weight(weight)?;
        }
        points.retain(|&(_, w)| w > 0.0);
        if points.is_empty() {
            return Err(Error::invalid("empirical distribution has no mass"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(points.len());
        let mut mass: Vec<f64> = Vec::with_capacity(points.len());
        for (value, weight) in points {
            match support.last() {
                Some(&last) if last == value => *mass.last_mut().unwrap() += weight,
                _ => {
                    support.push(value);
                    mass.push(weight);
                }
            }
        }
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self::assemble(support, mass))
    }

    fn assemble(support: Vec<f64>, mass: Vec<f64>) -> Self {
        let mut upper = vec![0.0; mass.len() + 1];
        for i in (0..mass.len()).rev() {
            upper[i] = (upper[i + 1] + mass[i]).min(1.0);
        }
        Self { support, mass, upper }
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::from_weighted(vec![(value, 1.0)])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.mass.iter().copied())
    }

    /// `Pr{R > t}`.
    pub fn tail(&self, t: f64) -> f64 {
        let idx = self.support.partition_point(|&s| s <= t);
        self.upper[idx]
    }

    /// `Pr{R <= t}`.
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.tail(t)
    }

    /// `Pr{lower < R <= upper}`.
    pub fn interval_mass(&self, lower: f64, upper: f64) -> f64 {
        (self.tail(lower) - self.tail(upper)).max(0.0)
    }

    /// Mixture `Σ weight_i · dist_i`; weights are normalized.
    pub fn mixture(parts: &[(&EmpiricalDistribution, f64)]) -> Result<Self> {
        let points = parts
            .iter()
            .flat_map(|(d, w)| d.iter().map(move |(s, m)| (s, m * w)))
            .collect();
        Self::from_weighted(points)
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(s, m)| s * m).sum()
    }
}

/// Per-group, per-outcome score distributions `R | A=a, Y=y` together with
/// the joint masses `Pr{A=a, Y=y}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalScoreDistribution {
    groups: Vec<String>,
    conditionals: Vec<[EmpiricalDistribution; 2]>,
    group_outcome: Vec<[f64; 2]>,
}

impl ConditionalScoreDistribution {
    /// `group_outcome[a][y]` is `Pr{A=a, Y=y}` (or any positive multiple).
    pub fn new(
        groups: Vec<String>,
        conditionals: Vec<[EmpiricalDistribution; 2]>,
        group_outcome: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if groups.len() != conditionals.len() || groups.len() != group_outcome.len() {
            return Err(Error::invalid("group count mismatch"));
        }
        if groups.is_empty() {
            return Err(Error::invalid("score distribution has no groups"));
        }
        let mut total = 0.0;
        for (a, masses) in group_outcome.iter().enumerate() {
            for (y, &m) in masses.iter().enumerate() {
                check_weight(m)?;
                if m <= 0.0 {
                    return Err(Error::EmptyGroupOutcome { group: a, outcome: y as u8 });
                }
                total += m;
            }
        }
        let group_outcome = group_outcome.into_iter().map(|g| g.map(|m| m / total)).collect();
        for dist in conditionals.iter().flatten() {
            // Summation error grows with the support size.
            let sum: f64 = dist.masses().iter().sum();
            let slack = MASS_TOLERANCE.max(4.0 * f64::EPSILON * dist.len() as f64);
            if (sum - 1.0).abs() > slack {
                return Err(Error::invalid(format!("conditional sums to {sum}")));
            }
        }
        Ok(Self { groups, conditionals, group_outcome })
    }

    pub fn group_count(&self) -> usize {
        self.conditionals.len()
    }

    pub fn group_names(&self) -> &[String] {
        &self.groups
    }

    pub fn group_label(&self, group: usize) -> Result<GroupLabel> {
        let name = self.groups.get(group).ok_or(Error::UnknownGroup(group))?;
        Ok(GroupLabel { id: group, name: name.clone() })
    }

    pub(crate) fn check_group(&self, group: usize) -> Result<()> {
        if group < self.group_count() {
            Ok(())
        } else {
            Err(Error::UnknownGroup(group))
        }
    }

    /// `R | A=group, Y=outcome`.
    pub fn conditional(&self, group: usize, outcome: bool) -> &EmpiricalDistribution {
        &self.conditionals[group][outcome as usize]
    }

    /// `Pr{A=group, Y=outcome}`.
    pub fn group_outcome_mass(&self, group: usize, outcome: bool) -> f64 {
        self.group_outcome[group][outcome as usize]
    }

    pub fn prior(&self, group: usize) -> f64 {
        self.group_outcome[group][0] + self.group_outcome[group][1]
    }

    /// `Pr{Y=1 | A=group}`.
    pub fn base_rate(&self, group: usize) -> f64 {
        self.group_outcome[group][1] / self.prior(group)
    }

    pub fn outcome_mass(&self, outcome: bool) -> f64 {
        self.group_outcome.iter().map(|g| g[outcome as usize]).sum()
    }

    /// Rates of the threshold predictor `I{R > t}` within a group.
    pub fn rates_at(&self, group: usize, threshold: f64) -> RatePoint {
        RatePoint::new(
            self.conditional(group, false).tail(threshold),
            self.conditional(group, true).tail(threshold),
        )
    }

    /// `Pr{R > t | A=group}`.
    pub fn acceptance_at(&self, group: usize, threshold: f64) -> f64 {
        let rates = self.rates_at(group, threshold);
        self.acceptance_of(group, rates)
    }

    /// Acceptance rate `Pr{Ỹ=1 | A=group}` of a predictor with these rates.
    pub fn acceptance_of(&self, group: usize, rates: RatePoint) -> f64 {
        let base = self.base_rate(group);
        (1.0 - base) * rates.fpr + base * rates.tpr
    }

    /// Distinct score values observed in a group under either outcome.
    pub fn group_support(&self, group: usize) -> Vec<f64> {
        merge_support(self.conditionals[group].iter())
    }

    /// Distinct score values observed anywhere.
    pub fn pooled_support(&self) -> Vec<f64> {
        merge_support(self.conditionals.iter().flatten())
    }

    /// Score distribution of a group, `R | A=group`.
    pub fn group_marginal(&self, group: usize) -> EmpiricalDistribution {
        let [neg, pos] = &self.conditionals[group];
        EmpiricalDistribution::mixture(&[
            (neg, self.group_outcome[group][0]),
            (pos, self.group_outcome[group][1]),
        ])
        .expect("conditionals carry positive mass")
    }

    /// Score distribution of the whole population.
    pub fn pooled_marginal(&self) -> EmpiricalDistribution {
        let parts: Vec<_> = (0..self.group_count())
            .flat_map(|a| {
                [false, true].map(|y| (self.conditional(a, y), self.group_outcome_mass(a, y)))
            })
            .collect();
        EmpiricalDistribution::mixture(&parts).expect("conditionals carry positive mass")
    }

    /// Whether the two distributions condition on the same groups.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.group_count() == other.group_count()
    }

    /// The distribution with a per-group transformation applied to scores.
    pub fn map_scores(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let conditionals = self
            .conditionals
            .iter()
            .enumerate()
            .map(|(a, pair)| {
                let map = |d: &EmpiricalDistribution| {
                    EmpiricalDistribution::from_weighted(d.iter().map(|(s, m)| (f(a, s), m)).collect())
                };
                Ok([map(&pair[0])?, map(&pair[1])?])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.groups.clone(), conditionals, self.group_outcome.clone())
    }
}

fn merge_support<'a>(dists: impl Iterator<Item = &'a EmpiricalDistribution>) -> Vec<f64> {
    let mut all: Vec<f64> = dists.flat_map(|d| d.support().iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Estimates the conditional score distributions by weighted counting.
pub fn estimate_score_distribution(samples: &[ScoreSample]) -> Result<ConditionalScoreDistribution> {
    let group_count = samples.iter().map(|s| s.group + 1).max().unwrap_or(0);
    estimate_score_distribution_named(samples, default_group_names(group_count))
}

pub(crate) fn estimate_score_distribution_named(
    samples: &[ScoreSample],
    groups: Vec<String>,
) -> Result<ConditionalScoreDistribution> {
    if groups.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut points: Vec<[Vec<(f64, f64)>; 2]> = vec![[Vec::new(), Vec::new()]; groups.len()];
    let mut totals = vec![[0.0; 2]; groups.len()];
    for sample in samples {
        check_weight(sample.weight)?;
        if !sample.score.is_finite() {
            return Err(Error::NonFiniteScore(sample.score));
        }
        let y = sample.outcome as usize;
        let bucket = points.get_mut(sample.group).ok_or(Error::UnknownGroup(sample.group))?;
        bucket[y].push((sample.score, sample.weight));
        totals[sample.group][y] += sample.weight;
    }
    for (a, t) in totals.iter().enumerate() {
        for (y, &w) in t.iter().enumerate() {
            if w <= 0.0 {
                return Err(Error::EmptyGroupOutcome { group: a, outcome: y as u8 });
            }
        }
    }
    let conditionals = points
        .into_iter()
        .map(|[neg, pos]| {
            Ok([EmpiricalDistribution::from_weighted(neg)?, EmpiricalDistribution::from_weighted(pos)?])
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionalScoreDistribution::new(groups, conditionals, totals)
}
