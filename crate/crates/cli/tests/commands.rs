use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use fairpost::audit::AuditCriterion;
use fairpost::joint::read_samples_path;
use fairpost::postprocess::{derive, optimize};
use fairpost::{Criterion, Error, LossSpec};
use fairpost_cli::*;
use serde_json::Value;
use tempfile::TempDir;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("fairpost").chain(args.iter().copied())).unwrap()
}

fn json(outcome: &Outcome) -> Value {
    serde_json::from_str(&outcome.stdout).unwrap()
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_fairpost"))
}

const BIASED: &str = "group,score_or_pred,outcome,weight\n\
    a,1,1,30\na,0,1,10\na,1,0,10\na,0,0,50\n\
    b,1,1,20\nb,0,1,20\nb,1,0,5\nb,0,0,55\n";

#[test]
fn perfect_predictor_passes_everything() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "perfect.csv", "group,score_or_pred,outcome\na,1,1\na,0,0\nb,1,1\nb,0,0\nb,1,1\nb,0,0\n");
    for kind in ["binary", "score"] {
        let outcome = run(parse(&["audit", path.to_str().unwrap(), "--kind", kind])).unwrap();
        assert_eq!(outcome.exit_code, EXIT_OK);
        let report = json(&outcome);
        assert_eq!(report["schema_version"], 1);
        for result in report["results"].as_array().unwrap() {
            if let Some(v) = result["violation"].as_f64() {
                assert_eq!(v, 0.0, "{result}");
            }
        }
    }
}

#[test]
fn audit_exit_code_reflects_violations() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "biased.csv", BIASED);
    let outcome = run(parse(&["audit", path.to_str().unwrap(), "--kind", "binary", "--criterion", "equal-opportunity"])).unwrap();
    assert_eq!(outcome.exit_code, EXIT_VIOLATION);
    let report = json(&outcome);
    assert!((report["results"][0]["violation"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let loose = run(parse(&["audit", path.to_str().unwrap(), "--kind", "binary", "--tol", "0.3"])).unwrap();
    assert_eq!(loose.exit_code, EXIT_OK);

    let status = bin().args(["audit", path.to_str().unwrap(), "--kind", "binary"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_VIOLATION));
}

#[test]
fn malformed_rows_name_the_line() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "bad.csv", "group,score_or_pred,outcome\na,1,1\na,zero,0\n");
    match run(parse(&["audit", path.to_str().unwrap()])) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let output = bin().args(["audit", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&output.stderr).contains("line 3"));
}

#[test]
fn missing_outcome_names_the_group() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "one_sided.csv", "group,score_or_pred,outcome\nx,1,1\nx,0,0\ny,1,1\n");
    let err = run(parse(&["audit", path.to_str().unwrap(), "--kind", "binary"])).unwrap_err();
    assert!(err.to_string().contains("\"y\"") && err.to_string().contains("outcome 0"), "{err}");
}

#[test]
fn unknown_criterion_is_a_usage_error() {
    assert!(Cli::try_parse_from(["fairpost", "adjust", "x.csv", "--criterion", "fairest"]).is_err());
    let output = bin().args(["adjust", "x.csv", "--criterion", "fairest"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn binary_adjust_equals_library_call() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "biased.csv", BIASED);
    let p = path.to_str().unwrap();
    for (criterion, name) in [(Criterion::EqualizedOdds, "equalized-odds"), (Criterion::EqualOpportunity, "equal_opportunity")] {
        let outcome = run(parse(&["adjust", p, "--kind", "binary", "--criterion", name, "--cost-fp", "2"])).unwrap();
        assert_eq!(outcome.exit_code, EXIT_OK);
        let report = json(&outcome);
        let joint = read_samples_path(&path).unwrap().binary_joint().unwrap();
        let expected = derive(&joint, criterion, &LossSpec::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(report["result"]["loss"].as_f64().unwrap(), expected.loss);
        assert_eq!(report["result"]["predictor"], serde_json::to_value(&expected.predictor).unwrap());
        assert_eq!(report["closed_loop"]["results"][0]["passed"], true);
    }
}

#[test]
fn score_adjust_equals_library_call() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("group,score_or_pred,outcome\n");
    for i in 0..40 {
        let s = i % 10;
        text.push_str(&format!("a,{s},{}\n", u8::from(i % 3 != 0 && s > 3)));
        text.push_str(&format!("b,{},{}\n", s + 2, u8::from(i % 4 == 0 || s > 6)));
    }
    let path = write(dir.path(), "scores.csv", &text);
    let p = path.to_str().unwrap();
    let dist = read_samples_path(&path).unwrap().score_distribution().unwrap();
    for criterion in Criterion::ALL {
        let outcome = run(parse(&["adjust", p, "--criterion", criterion.as_str()])).unwrap();
        let report = json(&outcome);
        let expected = optimize(&dist, criterion, &LossSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(report["result"]["loss"].as_f64().unwrap(), expected.loss, "{criterion}");
        assert_eq!(report["result"]["policy"], serde_json::to_value(&expected.policy).unwrap());
        assert_eq!(report["closed_loop"].is_null(), audit_criterion(criterion).is_none());
        assert_eq!(outcome.exit_code, EXIT_OK);
    }
}

#[test]
fn adjust_writes_seeded_decisions() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "biased.csv", BIASED);
    let run_once = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let args = ["adjust", path.to_str().unwrap(), "--kind", "binary", "--criterion", "equalized_odds"];
        let mut args: Vec<&str> = args.to_vec();
        args.extend(["--seed", seed, "--decisions", out.to_str().unwrap()]);
        run(parse(&args)).unwrap();
        fs::read_to_string(out).unwrap()
    };
    let first = run_once("d1.csv", "5");
    assert_eq!(first, run_once("d2.csv", "5"));
    assert_eq!(first.lines().count(), 9);
    assert!(first.starts_with("group,score_or_pred,outcome,decision\n"));
}

#[test]
fn scenario_rejects_empty_samples() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    assert!(run(parse(&["scenario", "1", "--n", "0", "--out", out.to_str().unwrap()])).is_err());
    assert!(Cli::try_parse_from(["fairpost", "scenario", "3", "--out", "x"]).is_err());
}

#[test]
fn scenario_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    for which in ["1", "2"] {
        let a = dir.path().join(format!("{which}a"));
        let b = dir.path().join(format!("{which}b"));
        for out in [&a, &b] {
            run(parse(&["scenario", which, "--n", "500", "--seed", "11", "--out", out.to_str().unwrap()])).unwrap();
        }
        for file in ["r_star.csv", "r_tilde.csv", "records.csv", "metadata.json"] {
            assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
        }
        let metadata: Value = serde_json::from_str(&fs::read_to_string(a.join("metadata.json")).unwrap()).unwrap();
        assert_eq!(metadata["n"], 500);
        assert_eq!(metadata["scenario"], which);
    }
}

fn audit_result(dir: &Path, file: &str) -> Value {
    let path = dir.join(file);
    json(&run(parse(&["audit", path.to_str().unwrap()])).unwrap())
}

fn passed(report: &Value, criterion: AuditCriterion) -> bool {
    report["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["criterion"] == criterion.as_str())
        .unwrap()["passed"]
        .as_bool()
        .unwrap()
}

#[test]
fn scenario_exports_reproduce_the_audit_pattern() {
    let dir = TempDir::new().unwrap();
    for which in ["1", "2"] {
        let out = dir.path().join(which);
        run(parse(&["scenario", which, "--n", "100000", "--seed", "3", "--out", out.to_str().unwrap()])).unwrap();
        let star = audit_result(&out, "r_star.csv");
        let tilde = audit_result(&out, "r_tilde.csv");
        assert!(passed(&tilde, AuditCriterion::EqualizedOdds));
        assert!(!passed(&star, AuditCriterion::EqualizedOdds));
        assert!(passed(&tilde, AuditCriterion::IdenticalRoc));
        assert!(passed(&star, AuditCriterion::MatchingRoc));
        assert!(!passed(&star, AuditCriterion::IdenticalRoc));
        assert!(passed(&star, AuditCriterion::MatchingFrequencies));
        assert!(!passed(&tilde, AuditCriterion::MatchingFrequencies));
    }
}

fn synthetic_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic_fico_marginals.csv")
}

#[test]
fn casestudy_outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let input = synthetic_path();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run(parse(&["casestudy", input.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()])).unwrap();
    }
    for file in ["summary.json", "thresholds.csv", "rates.csv", "profit_curve.csv", "roc_curves.csv"] {
        let bytes = fs::read(a.join(file)).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(bytes, fs::read(b.join(file)).unwrap(), "{file}");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["seed"], 4);
    assert!((summary["break_even"].as_f64().unwrap() - 0.82).abs() < 1e-12);
    assert_eq!(summary["ordering"]["passed"], true);
}

#[test]
fn casestudy_accepts_samples_and_regime_subsets() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "scores.csv", "group,score_or_pred,outcome\na,1,0\na,2,1\na,3,1\nb,1,0\nb,2,0\nb,3,1\n");
    let outcome = run(parse(&["casestudy", path.to_str().unwrap(), "--criterion", "equal_opportunity,group_blind"])).unwrap();
    let summary = json(&outcome);
    let names: Vec<&str> = summary["regimes"].as_array().unwrap().iter().map(|r| r["criterion"].as_str().unwrap()).collect();
    assert_eq!(names, ["max_profit", "equal_opportunity", "group_blind"]);
    assert!(summary["ordering"].is_null());
    assert!(run(parse(&["casestudy", path.to_str().unwrap(), "--cost-fp", "0"])).is_err());
}
