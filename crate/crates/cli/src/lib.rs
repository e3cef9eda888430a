//! Commands behind the `fairpost` binary.
//!
//! Each `cmd_*` function does its own file IO and returns the text that
//! the binary prints plus the process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use fairpost::audit::{audit, AuditConfig, AuditCriterion, AuditReport, Binning, FrequencyOptions};
use fairpost::casestudy::{
    profit_curve_csv, rates_csv, read_marginals, roc_curves_csv, run_case_study, thresholds_csv,
    BreakEvenSweep, CaseStudyConfig, CaseStudyReport,
};
use fairpost::joint::{read_samples, SampleTable};
use fairpost::postprocess::{
    apply_derived, apply_policy, derive, optimize, AdjustmentResult, PolicyReport, CONSTRAINT_TOLERANCE,
};
use fairpost::scenarios::{sample_scenario, Scenario, ScenarioRecord, ScoreKind, GROUP_NAMES};
use fairpost::{ConditionalScoreDistribution, Criterion, Error, JointBinaryDistribution, LossSpec, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit code when every audited criterion is within tolerance.
pub const EXIT_OK: i32 = 0;
/// Exit code when some audited criterion exceeds its tolerance.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit code for errors, matching clap's usage errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fairpost", version, about = "Audit and post-process predictors for equalized odds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure oblivious non-discrimination criteria.
    Audit(AuditArgs),
    /// Derive a loss-optimal predictor satisfying a criterion.
    Adjust(AdjustArgs),
    /// Sample one of the two reference scenarios.
    Scenario(ScenarioArgs),
    /// Compare the five regimes on a credit-score style input.
    Casestudy(CaseStudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Binary,
    Score,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Samples CSV (`group,score_or_pred,outcome[,weight]`) or, for scores,
    /// a marginals CSV.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "score")]
    pub kind: InputKind,
    /// Criterion to check; repeat for several. Defaults to all.
    #[arg(long = "criterion")]
    pub criteria: Vec<AuditCriterion>,
    /// One tolerance for every criterion, replacing the defaults.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Equal-mass bins for matching frequencies.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "score")]
    pub kind: InputKind,
    #[arg(long)]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 1.0)]
    pub cost_fp: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cost_fn: f64,
    /// Tolerance of the re-audit of the emitted predictor.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for drawing per-row decisions with `--decisions`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write one randomized decision per input row to this CSV.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// `1` or `2`.
    pub which: Scenario,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    /// Samples CSV or marginals CSV.
    pub input: PathBuf,
    #[arg(long, default_value_t = 82.0)]
    pub cost_fp: f64,
    #[arg(long, default_value_t = 18.0)]
    pub cost_fn: f64,
    /// Regimes to run, comma separated. Defaults to all five.
    #[arg(long = "criterion", value_delimiter = ',')]
    pub regimes: Vec<Criterion>,
    #[arg(long, default_value_t = 0.5)]
    pub sweep_start: f64,
    #[arg(long, default_value_t = 0.99)]
    pub sweep_stop: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sweep_step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the JSON summary and CSV tables. Without it the
    /// summary is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, exit_code: EXIT_OK }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Audit(args) => cmd_audit(&args),
        Command::Adjust(args) => cmd_adjust(&args),
        Command::Scenario(args) => cmd_scenario(&args),
        Command::Casestudy(args) => cmd_casestudy(&args),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize>(command: &str, body: T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&Envelope { schema_version: SCHEMA_VERSION, command, body })?;
    text.push('\n');
    Ok(text)
}

fn emit(text: String, out: Option<&Path>) -> Result<String> {
    match out {
        Some(path) => {
            fs::write(path, &text)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        None => Ok(text),
    }
}

/// Replaces group ids in errors with the group names.
fn with_names(err: Error, names: &[String]) -> Error {
    match err {
        Error::EmptyGroupOutcome { group, outcome } => {
            let name = names.get(group).map_or_else(|| group.to_string(), |n| format!("{n:?}"));
            Error::InvalidInput(format!(
                "group {name} has no rows with outcome {outcome}; every group needs both outcomes"
            ))
        }
        other => other,
    }
}

fn read_table(path: &Path) -> Result<SampleTable> {
    read_samples(fs::File::open(path)?)
}

fn is_marginals(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("").to_ascii_lowercase();
    Ok(header.split(',').any(|h| h.trim() == "cdf"))
}

/// Score distribution from a samples or marginals CSV, decided by header.
pub fn load_scores(path: &Path) -> Result<ConditionalScoreDistribution> {
    if is_marginals(path)? {
        let table = read_marginals(fs::File::open(path)?)?;
        table.score_distribution().map_err(|e| with_names(e, &table.groups))
    } else {
        let table = read_table(path)?;
        table.score_distribution().map_err(|e| with_names(e, &table.group_names))
    }
}

pub fn load_binary(path: &Path) -> Result<JointBinaryDistribution> {
    let table = read_table(path)?;
    table.binary_joint().map_err(|e| with_names(e, &table.group_names))
}

#[derive(Serialize)]
struct AuditOutput<'a> {
    input: String,
    passed: bool,
    worst_ratio: f64,
    #[serde(flatten)]
    report: &'a AuditReport,
}

pub fn audit_config(args: &AuditArgs) -> Result<AuditConfig> {
    if args.bins == 0 {
        return Err(Error::InvalidInput("--bins must be positive".into()));
    }
    let mut config = AuditConfig::default();
    if !args.criteria.is_empty() {
        config.criteria = args.criteria.clone();
    }
    if let Some(tol) = args.tol {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Error::InvalidInput(format!("--tol must be non-negative, got {tol}")));
        }
        config = config.with_tolerance(tol);
    }
    config.frequencies = FrequencyOptions { binning: Binning::EqualMass { bins: args.bins }, ..FrequencyOptions::default() };
    Ok(config)
}

pub fn cmd_audit(args: &AuditArgs) -> Result<Outcome> {
    let config = audit_config(args)?;
    let report = match args.kind {
        InputKind::Binary => audit(&load_binary(&args.input)?, &config)?,
        InputKind::Score => audit(&load_scores(&args.input)?, &config)?,
    };
    let passed = report.all_passed();
    let output = AuditOutput {
        input: args.input.display().to_string(),
        passed,
        worst_ratio: report.worst_ratio(),
        report: &report,
    };
    let text = emit(to_json("audit", output)?, args.out.as_deref())?;
    Ok(Outcome { stdout: text, exit_code: if passed { EXIT_OK } else { EXIT_VIOLATION } })
}

#[derive(Serialize)]
#[serde(untagged)]
enum Adjusted {
    Binary(AdjustmentResult),
    Score(PolicyReport),
}

#[derive(Serialize)]
struct AdjustOutput {
    input: String,
    kind: &'static str,
    loss: LossSpec,
    seed: u64,
    result: Adjusted,
    /// Audit of the emitted predictor against its own criterion; absent for
    /// criteria without an equality constraint.
    closed_loop: Option<AuditReport>,
}

/// The audit criterion that checks a regime's constraint.
pub fn audit_criterion(criterion: Criterion) -> Option<AuditCriterion> {
    match criterion {
        Criterion::EqualizedOdds => Some(AuditCriterion::EqualizedOdds),
        Criterion::EqualOpportunity => Some(AuditCriterion::EqualOpportunity),
        Criterion::DemographicParity => Some(AuditCriterion::DemographicParity),
        Criterion::MaxProfit | Criterion::GroupBlind => None,
    }
}

fn closed_loop(derived: &JointBinaryDistribution, criterion: Criterion, tol: f64) -> Result<Option<AuditReport>> {
    audit_criterion(criterion)
        .map(|c| audit(derived, &AuditConfig::with_criteria(vec![c]).with_tolerance(tol)))
        .transpose()
}

pub fn cmd_adjust(args: &AdjustArgs) -> Result<Outcome> {
    let loss = LossSpec::new(args.cost_fp, args.cost_fn)?;
    let tol = args.tol.unwrap_or(CONSTRAINT_TOLERANCE);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (kind, result, check, decisions) = match args.kind {
        InputKind::Binary => {
            let table = read_table(&args.input)?;
            let joint = table.binary_joint().map_err(|e| with_names(e, &table.group_names))?;
            let result = derive(&joint, args.criterion, &loss)?;
            let check = closed_loop(&result.predictor.derived_joint(&joint)?, args.criterion, tol)?;
            let decisions = match args.decisions {
                Some(_) => Some(
                    table
                        .rows
                        .iter()
                        .map(|row| apply_derived(&result.predictor, row.score == 1.0, row.group, &mut rng))
                        .collect::<Result<Vec<bool>>>()?,
                ),
                None => None,
            };
            ("binary", Adjusted::Binary(result), check, decisions.map(|d| (table, d)))
        }
        InputKind::Score => {
            let marginals = is_marginals(&args.input)?;
            if marginals && args.decisions.is_some() {
                return Err(Error::InvalidInput("--decisions needs a samples CSV, not marginals".into()));
            }
            let dist = load_scores(&args.input)?;
            let report = optimize(&dist, args.criterion, &loss)?;
            let check = closed_loop(&report.derived_joint(&dist)?, args.criterion, tol)?;
            let decisions = match args.decisions {
                Some(_) => {
                    let table = read_table(&args.input)?;
                    let d = table
                        .rows
                        .iter()
                        .map(|row| apply_policy(&report.policy, row.score, row.group, &mut rng))
                        .collect::<Result<Vec<bool>>>()?;
                    Some((table, d))
                }
                None => None,
            };
            ("score", Adjusted::Score(report), check, decisions)
        }
    };
    if let (Some(path), Some((table, decisions))) = (&args.decisions, decisions) {
        write_decisions(path, &table, &decisions)?;
    }
    let passed = check.as_ref().is_none_or(AuditReport::all_passed);
    let output = AdjustOutput {
        input: args.input.display().to_string(),
        kind,
        loss,
        seed: args.seed,
        result,
        closed_loop: check,
    };
    let text = emit(to_json("adjust", output)?, args.out.as_deref())?;
    Ok(Outcome { stdout: text, exit_code: if passed { EXIT_OK } else { EXIT_VIOLATION } })
}

fn write_decisions(path: &Path, table: &SampleTable, decisions: &[bool]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    writer.write_record(["group", "score_or_pred", "outcome", "decision"]).map_err(csv_error)?;
    for (row, &d) in table.rows.iter().zip(decisions) {
        writer
            .write_record([
                table.group_names[row.group].as_str(),
                &row.score.to_string(),
                if row.outcome { "1" } else { "0" },
                if d { "1" } else { "0" },
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(err: csv::Error) -> Error {
    Error::InvalidInput(format!("csv output: {err}"))
}

#[derive(Serialize)]
struct ScenarioMetadata {
    scenario: Scenario,
    n: usize,
    seed: u64,
    /// Group names in the CSVs for `A = -1` and `A = +1`.
    groups: [&'static str; 2],
    files: Vec<&'static str>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn score_csv(records: &[ScenarioRecord], kind: ScoreKind) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["group", "score_or_pred", "outcome"]).map_err(csv_error)?;
    for r in records {
        writer
            .write_record([GROUP_NAMES[r.group()], &r.score(kind).to_string(), if r.outcome() { "1" } else { "0" }])
            .map_err(csv_error)?;
    }
    writer.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn records_csv(records: &[ScenarioRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["a", "x1", "x2", "x3", "y", "r_star", "r_tilde"]).map_err(csv_error)?;
    for r in records {
        writer
            .write_record([
                r.a.to_string(),
                opt(r.x1),
                opt(r.x2),
                opt(r.x3),
                r.y.to_string(),
                r.r_star.to_string(),
                r.r_tilde.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Writes `r_star.csv` and `r_tilde.csv` in the ingestion format, the raw
/// `records.csv`, and `metadata.json`.
pub fn cmd_scenario(args: &ScenarioArgs) -> Result<Outcome> {
    if args.n == 0 {
        return Err(Error::InvalidInput("--n must be positive".into()));
    }
    let records = sample_scenario(args.which, args.n, args.seed);
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("r_star.csv"), score_csv(&records, ScoreKind::RStar)?)?;
    fs::write(args.out.join("r_tilde.csv"), score_csv(&records, ScoreKind::RTilde)?)?;
    fs::write(args.out.join("records.csv"), records_csv(&records)?)?;
    let metadata = ScenarioMetadata {
        scenario: args.which,
        n: args.n,
        seed: args.seed,
        groups: GROUP_NAMES,
        files: vec!["r_star.csv", "r_tilde.csv", "records.csv"],
    };
    fs::write(args.out.join("metadata.json"), to_json("scenario", metadata)?)?;
    Ok(Outcome::ok(format!("wrote scenario {} (n={}) to {}\n", args.which, args.n, args.out.display())))
}

pub fn casestudy_config(args: &CaseStudyArgs) -> Result<CaseStudyConfig> {
    let mut config = CaseStudyConfig::new(&args.input);
    config.loss = LossSpec::new(args.cost_fp, args.cost_fn)?;
    if !args.regimes.is_empty() {
        config.regimes = args.regimes.clone();
    }
    config.sweep = BreakEvenSweep { start: args.sweep_start, stop: args.sweep_stop, step: args.sweep_step };
    config.out_dir = args.out.clone();
    config.seed = args.seed;
    config.validate()?;
    Ok(config)
}

/// Runs the case study and, with `--out`, writes `summary.json`,
/// `thresholds.csv`, `rates.csv`, `profit_curve.csv` and `roc_curves.csv`.
pub fn cmd_casestudy(args: &CaseStudyArgs) -> Result<Outcome> {
    let config = casestudy_config(args)?;
    let dist = load_scores(&config.input)?;
    let report: CaseStudyReport = run_case_study(&dist, &config)?;
    let json = to_json("casestudy", &report)?;
    let Some(dir) = &config.out_dir else {
        return Ok(Outcome::ok(json));
    };
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), json)?;
    fs::write(dir.join("thresholds.csv"), thresholds_csv(&report)?)?;
    fs::write(dir.join("rates.csv"), rates_csv(&report)?)?;
    fs::write(dir.join("profit_curve.csv"), profit_curve_csv(&report)?)?;
    fs::write(dir.join("roc_curves.csv"), roc_curves_csv(&dist)?)?;
    let mut text = String::new();
    for regime in &report.regimes {
        let fraction = regime.profit_fraction.map_or("n/a".to_string(), |f| format!("{:.1}%", 100.0 * f));
        text.push_str(&format!("{:<20} {fraction}\n", regime.criterion.as_str()));
    }
    text.push_str(&format!("wrote {}\n", dir.display()));
    Ok(Outcome::ok(text))
}
