//! Five-regime comparison on a credit-score style input.
//!
//! The input is either the sample format read by [`crate::joint::read_samples`]
//! or a marginals table: per group, the cumulative score distribution, the
//! positive-outcome (non-default) rate at each score, and the group size.
//!
//! ```text
//! group,score,cdf,non_default_rate,group_size
//! g1,300,0.01,0.02,1000
//! g1,310,0.03,0.03,1000
//! ...
//! ```
//!
//! Profit is measured against rejecting everybody: `profit = loss(reject
//! all) - loss(policy)`, reported as a fraction of the max-profit regime.

use std::io::Read;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{conditional_roc, ThresholdRule};
use crate::joint::{
    estimate_score_distribution_named, ConditionalScoreDistribution, LossSpec, RatePoint, ScoreSample,
};
use crate::postprocess::{optimize, Criterion, PolicyReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Slack for the percentile ordering check.
pub const ORDERING_SLACK: f64 = 1e-9;

/// Tolerance on the last cumulative fraction of a group being 1.
const CDF_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub score: f64,
    pub cdf: f64,
    pub non_default_rate: f64,
}

/// Per-group score CDFs and outcome rates, plus group sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsTable {
    pub groups: Vec<String>,
    pub sizes: Vec<f64>,
    /// Rows per group with strictly increasing scores.
    pub rows: Vec<Vec<MarginalRow>>,
}

impl MarginalsTable {
    pub fn new(groups: Vec<String>, sizes: Vec<f64>, rows: Vec<Vec<MarginalRow>>) -> Result<Self> {
        if groups.is_empty() || groups.len() != sizes.len() || groups.len() != rows.len() {
            return Err(Error::invalid("marginals need one size and one row list per group"));
        }
        for (a, group_rows) in rows.iter().enumerate() {
            let name = &groups[a];
            if !(sizes[a].is_finite() && sizes[a] > 0.0) {
                return Err(Error::invalid(format!("group {name}: size must be positive")));
            }
            let mut previous: Option<MarginalRow> = None;
            for row in group_rows {
                if !row.score.is_finite() {
                    return Err(Error::NonFiniteScore(row.score));
                }
                if !(0.0..=1.0).contains(&row.cdf) || !(0.0..=1.0).contains(&row.non_default_rate) {
                    return Err(Error::invalid(format!(
                        "group {name}, score {}: cdf and rate must lie in [0, 1]",
                        row.score
                    )));
                }
                if let Some(p) = previous {
                    if row.score <= p.score || row.cdf < p.cdf {
                        return Err(Error::invalid(format!(
                            "group {name}: scores must increase and cdf must not decrease (at score {})",
                            row.score
                        )));
                    }
                }
                previous = Some(*row);
            }
            match previous {
                Some(last) if (last.cdf - 1.0).abs() <= CDF_TOLERANCE => {}
                _ => return Err(Error::invalid(format!("group {name}: cdf must end at 1"))),
            }
        }
        Ok(Self { groups, sizes, rows })
    }

    /// Weighted `(group, score, outcome)` mass points: the mass of each
    /// score step times the group size, split by the outcome rate.
    pub fn samples(&self) -> Vec<ScoreSample> {
        let mut out = Vec::new();
        for (a, rows) in self.rows.iter().enumerate() {
            let mut below = 0.0;
            for row in rows {
                let weight = (row.cdf - below).max(0.0) * self.sizes[a];
                below = row.cdf;
                if weight <= 0.0 {
                    continue;
                }
                let positive = weight * row.non_default_rate;
                let negative = weight - positive;
                if positive > 0.0 {
                    out.push(ScoreSample::new(a, row.score, true, positive));
                }
                if negative > 0.0 {
                    out.push(ScoreSample::new(a, row.score, false, negative));
                }
            }
        }
        out
    }

    pub fn score_distribution(&self) -> Result<ConditionalScoreDistribution> {
        estimate_score_distribution_named(&self.samples(), self.groups.clone())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(MARGINALS_HEADER).map_err(csv_write)?;
        for (a, rows) in self.rows.iter().enumerate() {
            for row in rows {
                writer
                    .write_record([
                        self.groups[a].clone(),
                        row.score.to_string(),
                        row.cdf.to_string(),
                        row.non_default_rate.to_string(),
                        self.sizes[a].to_string(),
                    ])
                    .map_err(csv_write)?;
            }
        }
        finish_csv(writer)
    }
}

const MARGINALS_HEADER: [&str; 5] = ["group", "score", "cdf", "non_default_rate", "group_size"];

pub fn read_marginals(input: impl Read) -> Result<MarginalsTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| parse_error(&e, 1))?.clone();
    if header.len() != 5 || header.iter().zip(MARGINALS_HEADER).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, got {header:?}", MARGINALS_HEADER.join(",")),
        });
    }
    let mut groups: Vec<String> = Vec::new();
    let mut sizes: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<MarginalRow>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        let number = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| err(format!("invalid {} {:?}", MARGINALS_HEADER[i], &record[i])))
        };
        let name = &record[0];
        if name.is_empty() {
            return Err(err("empty group".into()));
        }
        let row = MarginalRow { score: number(1)?, cdf: number(2)?, non_default_rate: number(3)? };
        let size = number(4)?;
        let a = match groups.iter().position(|g| g == name) {
            Some(a) => a,
            None => {
                groups.push(name.to_string());
                sizes.push(size);
                rows.push(Vec::new());
                groups.len() - 1
            }
        };
        if size != sizes[a] {
            return Err(err(format!("group {name}: group_size {size} differs from earlier {}", sizes[a])));
        }
        if let Some(prev) = rows[a].last() {
            if row.score <= prev.score || row.cdf < prev.cdf {
                return Err(err(format!("group {name}: scores must increase and cdf must not decrease")));
            }
        }
        rows[a].push(row);
    }
    MarginalsTable::new(groups, sizes, rows)
}

/// Break-even rates `start, start + step, ...` up to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenSweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for BreakEvenSweep {
    fn default() -> Self {
        Self { start: 0.5, stop: 0.99, step: 0.01 }
    }
}

impl BreakEvenSweep {
    pub fn points(&self) -> Result<Vec<f64>> {
        let valid = self.step > 0.0
            && self.start.is_finite()
            && self.stop.is_finite()
            && self.start <= self.stop
            && (0.0..=1.0).contains(&self.start)
            && (0.0..=1.0).contains(&self.stop);
        if !valid {
            return Err(Error::invalid(format!("invalid break-even sweep {self:?}")));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Rounded to 12 digits so that 0.5 + 32 * 0.01 prints as 0.82.
        Ok((0..=count).map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyConfig {
    pub input: PathBuf,
    pub loss: LossSpec,
    pub regimes: Vec<Criterion>,
    pub sweep: BreakEvenSweep,
    pub out_dir: Option<PathBuf>,
    /// Recorded in the output; the case study itself draws no random numbers.
    pub seed: u64,
}

impl CaseStudyConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            loss: LossSpec { cost_fp: 82.0, cost_fn: 18.0 },
            regimes: Criterion::ALL.to_vec(),
            sweep: BreakEvenSweep::default(),
            out_dir: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        LossSpec::new(self.loss.cost_fp, self.loss.cost_fn)?;
        if self.loss.cost_fp <= 0.0 || self.loss.cost_fn <= 0.0 {
            return Err(Error::invalid("case-study loss ratio must be positive"));
        }
        if self.regimes.is_empty() {
            return Err(Error::invalid("no regimes requested"));
        }
        self.sweep.points()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeResult {
    pub criterion: Criterion,
    pub loss: f64,
    pub profit: f64,
    /// `None` when the max-profit regime makes no profit.
    pub profit_fraction: Option<f64>,
    pub rules: Vec<ThresholdRule>,
    pub rates: Vec<RatePoint>,
    pub acceptance: Vec<f64>,
    pub percentiles: Vec<f64>,
    pub satisfied: bool,
    pub residual: f64,
    pub randomized: bool,
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub break_even: f64,
    /// Profit fraction per regime, in the order of [`CaseStudyReport::regimes`].
    pub fractions: Vec<Option<f64>>,
}

/// Within-group percentiles of the thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupOrdering {
    pub group: String,
    pub max_profit: f64,
    pub demographic_parity: f64,
    pub equal_opportunity: f64,
    pub equalized_odds: f64,
    pub passed: bool,
}

/// Equal-opportunity and (average) equalized-odds thresholds lie between
/// the max-profit and demographic-parity thresholds, group by group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub groups: Vec<GroupOrdering>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyReport {
    pub schema_version: u32,
    pub groups: Vec<String>,
    pub group_sizes: Vec<f64>,
    pub base_rates: Vec<f64>,
    pub loss: LossSpec,
    pub break_even: f64,
    pub seed: u64,
    pub regimes: Vec<RegimeResult>,
    pub sweep: Vec<SweepPoint>,
    pub ordering: Option<OrderingCheck>,
    pub notes: Vec<String>,
}

/// Loss of rejecting everybody.
pub fn reject_all_loss(dist: &ConditionalScoreDistribution, loss: &LossSpec) -> f64 {
    loss.cost_fn * dist.outcome_mass(true)
}

/// Runs each regime once; max profit is always included because profits
/// are normalized by it.
fn run_regimes(
    dist: &ConditionalScoreDistribution,
    loss: &LossSpec,
    regimes: &[Criterion],
) -> Result<Vec<PolicyReport>> {
    regimes.iter().map(|&c| optimize(dist, c, loss)).collect()
}

fn fractions(dist: &ConditionalScoreDistribution, loss: &LossSpec, reports: &[PolicyReport]) -> Vec<(f64, Option<f64>)> {
    let baseline = reject_all_loss(dist, loss);
    let best = reports
        .iter()
        .find(|r| r.criterion == Criterion::MaxProfit)
        .map(|r| baseline - r.loss)
        .unwrap_or(0.0);
    reports
        .iter()
        .map(|r| {
            let profit = baseline - r.loss;
            (profit, (best > 0.0).then(|| profit / best))
        })
        .collect()
}

pub fn run_case_study(dist: &ConditionalScoreDistribution, config: &CaseStudyConfig) -> Result<CaseStudyReport> {
    config.validate()?;
    let mut notes = Vec::new();
    let mut regimes = config.regimes.clone();
    regimes.dedup();
    if !regimes.contains(&Criterion::MaxProfit) {
        regimes.insert(0, Criterion::MaxProfit);
        notes.push("max_profit added: profits are reported relative to it".into());
    }

    let reports = run_regimes(dist, &config.loss, &regimes)?;
    let results: Vec<RegimeResult> = reports
        .iter()
        .zip(fractions(dist, &config.loss, &reports))
        .map(|(r, (profit, fraction))| RegimeResult {
            criterion: r.criterion,
            loss: r.loss,
            profit,
            profit_fraction: fraction,
            rules: r.policy.rules.clone(),
            rates: r.rates.clone(),
            acceptance: r.acceptance.clone(),
            percentiles: r.percentiles.clone(),
            satisfied: r.satisfied,
            residual: r.residual,
            randomized: r.randomized,
            floored: r.floored,
        })
        .collect();
    if results.iter().any(|r| r.profit_fraction.is_none()) {
        notes.push("max_profit makes no profit at this loss; fractions are undefined".into());
    }
    for r in reports.iter().filter(|r| !r.notes.is_empty()) {
        notes.extend(r.notes.iter().map(|n| format!("{}: {n}", r.criterion)));
    }

    let mut sweep = Vec::new();
    for break_even in config.sweep.points()? {
        let loss = LossSpec::from_break_even(break_even)?;
        let reports = run_regimes(dist, &loss, &regimes)?;
        let fractions = fractions(dist, &loss, &reports).into_iter().map(|(_, f)| f).collect();
        sweep.push(SweepPoint { break_even, fractions });
    }

    let ordering = ordering_check(dist, &results);
    Ok(CaseStudyReport {
        schema_version: SCHEMA_VERSION,
        groups: dist.group_names().to_vec(),
        group_sizes: (0..dist.group_count()).map(|a| dist.prior(a)).collect(),
        base_rates: (0..dist.group_count()).map(|a| dist.base_rate(a)).collect(),
        loss: config.loss,
        break_even: config.loss.break_even(),
        seed: config.seed,
        regimes: results,
        sweep,
        ordering,
        notes,
    })
}

/// `None` unless all four regimes involved were run.
pub fn ordering_check(dist: &ConditionalScoreDistribution, results: &[RegimeResult]) -> Option<OrderingCheck> {
    let find = |c: Criterion| results.iter().find(|r| r.criterion == c);
    let mp = find(Criterion::MaxProfit)?;
    let dp = find(Criterion::DemographicParity)?;
    let eo = find(Criterion::EqualOpportunity)?;
    let eodds = find(Criterion::EqualizedOdds)?;
    let groups: Vec<GroupOrdering> = dist
        .group_names()
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let (lo, hi) = if mp.percentiles[a] <= dp.percentiles[a] {
                (mp.percentiles[a], dp.percentiles[a])
            } else {
                (dp.percentiles[a], mp.percentiles[a])
            };
            let between = |x: f64| x >= lo - ORDERING_SLACK && x <= hi + ORDERING_SLACK;
            GroupOrdering {
                group: name.clone(),
                max_profit: mp.percentiles[a],
                demographic_parity: dp.percentiles[a],
                equal_opportunity: eo.percentiles[a],
                equalized_odds: eodds.percentiles[a],
                passed: between(eo.percentiles[a]) && between(eodds.percentiles[a]),
            }
        })
        .collect();
    let passed = groups.iter().all(|g| g.passed);
    Some(OrderingCheck { groups, passed })
}

fn rule_fields(rule: &ThresholdRule) -> [String; 5] {
    let (kind, lower, upper, p_lower, p_floor) = match *rule {
        ThresholdRule::Fixed { threshold } => ("fixed", threshold, threshold, 0.0, 0.0),
        ThresholdRule::Mixture { lower, upper, p_lower } => ("mixture", lower, upper, p_lower, 0.0),
        ThresholdRule::Floored { lower, upper, p_lower, p_floor } => ("floored", lower, upper, p_lower, p_floor),
    };
    [kind.to_string(), lower.to_string(), upper.to_string(), p_lower.to_string(), p_floor.to_string()]
}

/// `regime,group,kind,lower,upper,p_lower,p_floor,acceptance,percentile`.
/// A fixed threshold has `lower == upper`.
pub fn thresholds_csv(report: &CaseStudyReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["regime", "group", "kind", "lower", "upper", "p_lower", "p_floor", "acceptance", "percentile"])
        .map_err(csv_write)?;
    for regime in &report.regimes {
        for (a, group) in report.groups.iter().enumerate() {
            let mut record = vec![regime.criterion.to_string(), group.clone()];
            record.extend(rule_fields(&regime.rules[a]));
            record.push(regime.acceptance[a].to_string());
            record.push(regime.percentiles[a].to_string());
            writer.write_record(&record).map_err(csv_write)?;
        }
    }
    finish_csv(writer)
}

/// `regime,group,tpr,fpr`: the fraction of positives (non-defaulters)
/// accepted, and of negatives.
pub fn rates_csv(report: &CaseStudyReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["regime", "group", "tpr", "fpr"]).map_err(csv_write)?;
    for regime in &report.regimes {
        for (a, group) in report.groups.iter().enumerate() {
            let r = regime.rates[a];
            writer
                .write_record([regime.criterion.to_string(), group.clone(), r.tpr.to_string(), r.fpr.to_string()])
                .map_err(csv_write)?;
        }
    }
    finish_csv(writer)
}

/// `break_even,<regime>...`; undefined fractions are left empty.
pub fn profit_curve_csv(report: &CaseStudyReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["break_even".to_string()];
    header.extend(report.regimes.iter().map(|r| r.criterion.to_string()));
    writer.write_record(&header).map_err(csv_write)?;
    for point in &report.sweep {
        let mut record = vec![point.break_even.to_string()];
        record.extend(point.fractions.iter().map(|f| f.map(|v| v.to_string()).unwrap_or_default()));
        writer.write_record(&record).map_err(csv_write)?;
    }
    finish_csv(writer)
}

/// `group,threshold,fpr,tpr` for every group's ROC curve.
pub fn roc_curves_csv(dist: &ConditionalScoreDistribution) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["group", "threshold", "fpr", "tpr"]).map_err(csv_write)?;
    for (a, group) in dist.group_names().iter().enumerate() {
        for point in conditional_roc(dist, a)?.points() {
            let r = point.rates();
            writer
                .write_record([group.clone(), point.threshold.to_string(), r.fpr.to_string(), r.tpr.to_string()])
                .map_err(csv_write)?;
        }
    }
    finish_csv(writer)
}

/// FICO-like marginals with made-up parameters: four groups with normal
/// score distributions on 300..=850 and a shared logistic non-default
/// curve, shifted slightly per group. Not real data.
pub fn synthetic_marginals() -> MarginalsTable {
    // (name, size, mean, sd, calibration shift)
    let params: [(&str, f64, f64, f64, f64); 4] = [
        ("group_a", 7_500.0, 735.0, 75.0, -5.0),
        ("group_b", 18_000.0, 600.0, 90.0, 10.0),
        ("group_c", 13_000.0, 665.0, 85.0, 5.0),
        ("group_d", 130_000.0, 710.0, 85.0, 0.0),
    ];
    let scores: Vec<f64> = (0..=55).map(|i| 300.0 + 10.0 * f64::from(i)).collect();
    let round = |x: f64| (x * 1e6).round() / 1e6;
    let mut rows = Vec::new();
    for &(_, _, mean, sd, shift) in &params {
        let density: Vec<f64> = scores.iter().map(|s| (-0.5 * ((s - mean) / sd).powi(2)).exp()).collect();
        let total: f64 = density.iter().sum();
        let mut cumulative = 0.0;
        let mut group_rows: Vec<MarginalRow> = scores
            .iter()
            .zip(&density)
            .map(|(&score, d)| {
                cumulative += d / total;
                let rate = 1.0 / (1.0 + (-(score - 640.0 - shift) / 35.0).exp());
                MarginalRow { score, cdf: round(cumulative), non_default_rate: round(rate.clamp(0.002, 0.998)) }
            })
            .collect();
        group_rows.last_mut().unwrap().cdf = 1.0;
        rows.push(group_rows);
    }
    MarginalsTable {
        groups: params.iter().map(|s| s.0.to_string()).collect(),
        sizes: params.iter().map(|s| s.1).collect(),
        rows,
    }
}

fn csv_write(err: csv::Error) -> Error {
    Error::invalid(format!("csv output: {err}"))
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| Error::invalid(format!("csv output: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn parse_error(err: &csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse { line, message: err.to_string() }
}
