//! Two data-generating processes with identical joint distributions of
//! `(Y, A, R*, R̃)` but different causal structure.
//!
//! Values use the `±1` encoding internally. At the boundary to the rest of
//! the crate, `A = +1` becomes group 1 and `Y = +1` becomes outcome 1.
//!
//! * Scenario one: `A` uniform, `Pr{Y=y | A=a} = σ(2ay)`, `X1 = A`,
//!   `X2 = Y + N(0, 1)`, `R* = X1 + X2`, `R̃ = X2`.
//! * Scenario two: `X3 | A=a ~ σ(2a) N(a+1, 1) + σ(-2a) N(a-1, 1)`,
//!   `Pr{Y=y | X3=x} = σ(2yx)`, `R* = X3`, `R̃ = X3 - A`.
//!
//! In both, `R* | A=a, Y=y ~ N(a+y, 1)` and `R̃ | A=a, Y=y ~ N(y, 1)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::audit::ks_distance;
use crate::error::{Error, Result};
use crate::joint::{
    estimate_score_distribution_named, ConditionalScoreDistribution, EmpiricalDistribution,
    ScoreSample,
};

/// Group names used when scenario data enter the rest of the crate.
pub const GROUP_NAMES: [&str; 2] = ["-1", "+1"];
/// Significance level of the per-conditioning KS bands.
pub const KS_ALPHA: f64 = 0.01;
/// Width, in standard deviations, of the `(A, Y)` cell-frequency bands.
pub const CELL_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::One => "1",
            Scenario::Two => "2",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "i" | "one" => Ok(Scenario::One),
            "2" | "ii" | "two" => Ok(Scenario::Two),
            other => Err(Error::invalid(format!("unknown scenario {other:?}; expected 1 or 2"))),
        }
    }
}

/// Which of the two scores to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    RStar,
    RTilde,
}

impl ScoreKind {
    pub const BOTH: [ScoreKind; 2] = [ScoreKind::RStar, ScoreKind::RTilde];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::RStar => "r_star",
            ScoreKind::RTilde => "r_tilde",
        }
    }
}

/// One simulated individual. Features not used by a scenario are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub a: i8,
    pub x1: Option<f64>,
    pub x2: Option<f64>,
    pub x3: Option<f64>,
    pub y: i8,
    pub r_star: f64,
    pub r_tilde: f64,
}

impl ScenarioRecord {
    pub fn group(&self) -> usize {
        usize::from(self.a > 0)
    }

    pub fn outcome(&self) -> bool {
        self.y > 0
    }

    pub fn score(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::RStar => self.r_star,
            ScoreKind::RTilde => self.r_tilde,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn sign(positive: bool) -> i8 {
    if positive {
        1
    } else {
        -1
    }
}

pub fn sample_scenario_one(n: usize, seed: u64) -> Vec<ScenarioRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = sign(rng.gen_bool(0.5));
            let y = sign(rng.gen::<f64>() < sigmoid(2.0 * f64::from(a)));
            let noise: f64 = rng.sample(StandardNormal);
            let x1 = f64::from(a);
            let x2 = f64::from(y) + noise;
            ScenarioRecord { a, x1: Some(x1), x2: Some(x2), x3: None, y, r_star: x1 + x2, r_tilde: x2 }
        })
        .collect()
}

pub fn sample_scenario_two(n: usize, seed: u64) -> Vec<ScenarioRecord> {
    sample_scenario_two_components(n, seed).into_iter().map(|(r, _)| r).collect()
}

/// Scenario two, also reporting whether `X3` came from the `N(a+1, 1)`
/// component.
pub(crate) fn sample_scenario_two_components(n: usize, seed: u64) -> Vec<(ScenarioRecord, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = sign(rng.gen_bool(0.5));
            let af = f64::from(a);
            let upper = rng.gen::<f64>() < sigmoid(2.0 * af);
            let noise: f64 = rng.sample(StandardNormal);
            let x3 = if upper { af + 1.0 } else { af - 1.0 } + noise;
            let y = sign(rng.gen::<f64>() < sigmoid(2.0 * x3));
            let record = ScenarioRecord { a, x1: None, x2: None, x3: Some(x3), y, r_star: x3, r_tilde: x3 - af };
            (record, upper)
        })
        .collect()
}

pub fn sample_scenario(scenario: Scenario, n: usize, seed: u64) -> Vec<ScenarioRecord> {
    match scenario {
        Scenario::One => sample_scenario_one(n, seed),
        Scenario::Two => sample_scenario_two(n, seed),
    }
}

/// Records as unit-weight score samples in the `{0, 1}` encoding.
pub fn to_score_samples(records: &[ScenarioRecord], kind: ScoreKind) -> Vec<ScoreSample> {
    records
        .iter()
        .map(|r| ScoreSample::new(r.group(), r.score(kind), r.outcome(), 1.0))
        .collect()
}

pub fn score_distribution(records: &[ScenarioRecord], kind: ScoreKind) -> Result<ConditionalScoreDistribution> {
    estimate_score_distribution_named(
        &to_score_samples(records, kind),
        GROUP_NAMES.iter().map(|s| s.to_string()).collect(),
    )
}

/// Two-sample KS comparison of one conditional score distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsEntry {
    pub score: ScoreKind,
    pub a: i8,
    pub y: i8,
    pub n1: usize,
    pub n2: usize,
    pub statistic: f64,
    /// Asymptotic critical value at [`KS_ALPHA`].
    pub band: f64,
    pub passed: bool,
}

/// Comparison of the frequency of one `(A, Y)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellEntry {
    pub a: i8,
    pub y: i8,
    pub freq1: f64,
    pub freq2: f64,
    pub band: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSampleReport {
    pub ks: Vec<KsEntry>,
    pub cells: Vec<CellEntry>,
    pub passed: bool,
}

/// `c(α) sqrt((n1 + n2) / (n1 n2))` with `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_band(n1: usize, n2: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n1, n2) = (n1 as f64, n2 as f64);
    c * ((n1 + n2) / (n1 * n2)).sqrt()
}

/// Compares two record sets conditioning by conditioning.
pub fn two_sample_report(first: &[ScenarioRecord], second: &[ScenarioRecord]) -> Result<TwoSampleReport> {
    let mut ks = Vec::new();
    let mut cells = Vec::new();
    for a in [-1i8, 1] {
        for y in [-1i8, 1] {
            let pick = |records: &[ScenarioRecord], kind: ScoreKind| -> Vec<f64> {
                records.iter().filter(|r| r.a == a && r.y == y).map(|r| r.score(kind)).collect()
            };
            for kind in ScoreKind::BOTH {
                let (s1, s2) = (pick(first, kind), pick(second, kind));
                if s1.is_empty() || s2.is_empty() {
                    return Err(Error::EmptyGroupOutcome { group: usize::from(a > 0), outcome: u8::from(y > 0) });
                }
                let (n1, n2) = (s1.len(), s2.len());
                let unit = |v: Vec<f64>| EmpiricalDistribution::from_weighted(v.into_iter().map(|s| (s, 1.0)).collect());
                let statistic = ks_distance(&unit(s1)?, &unit(s2)?).0;
                let band = ks_band(n1, n2, KS_ALPHA);
                ks.push(KsEntry { score: kind, a, y, n1, n2, statistic, band, passed: statistic <= band });
            }
            let freq = |records: &[ScenarioRecord]| {
                records.iter().filter(|r| r.a == a && r.y == y).count() as f64 / records.len() as f64
            };
            let (freq1, freq2) = (freq(first), freq(second));
            let pooled = (freq1 * first.len() as f64 + freq2 * second.len() as f64)
                / (first.len() + second.len()) as f64;
            let sigma = (pooled * (1.0 - pooled) * (1.0 / first.len() as f64 + 1.0 / second.len() as f64)).sqrt();
            let band = CELL_SIGMAS * sigma;
            cells.push(CellEntry { a, y, freq1, freq2, band, passed: (freq1 - freq2).abs() <= band });
        }
    }
    let passed = ks.iter().all(|e| e.passed) && cells.iter().all(|c| c.passed);
    Ok(TwoSampleReport { ks, cells, passed })
}

/// Samples scenario one with `seed1` and scenario two with `seed2`, `n`
/// records each, and compares them. `n = 100_000` is a sensible default.
pub fn unidentifiability_check(n: usize, seed1: u64, seed2: u64) -> Result<TwoSampleReport> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    two_sample_report(&sample_scenario_one(n, seed1), &sample_scenario_two(n, seed2))
}
