//! CSV ingestion: `group,score_or_pred,outcome[,weight]` with a header row.
//!
//! Group names map to ids in order of first appearance; a missing weight
//! column (or empty cell) means weight 1.

use std::io::Read;
use std::path::Path;

use super::binary::estimate_binary_joint_named;
use super::score::estimate_score_distribution_named;
use super::{
    check_weight, BinarySample, ConditionalScoreDistribution, JointBinaryDistribution, ScoreSample,
};
use crate::error::{Error, Result};

/// Parsed rows of the ingestion format.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub group_names: Vec<String>,
    pub rows: Vec<ScoreSample>,
    /// Source line of each row, for error reporting.
    pub lines: Vec<u64>,
}

impl SampleTable {
    /// Interprets the value column as a binary prediction.
    pub fn binary_samples(&self) -> Result<Vec<BinarySample>> {
        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(row, &line)| {
                let prediction = match row.score {
                    0.0 => false,
                    1.0 => true,
                    v => {
                        return Err(Error::Parse {
                            line,
                            message: format!("binary prediction must be 0 or 1, got {v}"),
                        })
                    }
                };
                Ok(BinarySample::new(row.group, prediction, row.outcome, row.weight))
            })
            .collect()
    }

    pub fn binary_joint(&self) -> Result<JointBinaryDistribution> {
        estimate_binary_joint_named(&self.binary_samples()?, self.group_names.clone())
    }

    pub fn score_distribution(&self) -> Result<ConditionalScoreDistribution> {
        estimate_score_distribution_named(&self.rows, self.group_names.clone())
    }

    /// Weighted `(group, outcome)` counts, for reporting balance.
    pub fn group_outcome_weights(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.group_names.len()];
        for row in &self.rows {
            out[row.group][row.outcome as usize] += row.weight;
        }
        out
    }
}

pub fn read_samples_path(path: impl AsRef<Path>) -> Result<SampleTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_samples(file)
}

pub fn read_samples(input: impl Read) -> Result<SampleTable> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let expected = ["group", "score_or_pred", "outcome"];
    if header.len() < 3
        || header.len() > 4
        || header.iter().take(3).zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e))
        || header.get(3).is_some_and(|h| !h.eq_ignore_ascii_case("weight"))
    {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header group,score_or_pred,outcome[,weight], got {header:?}"),
        });
    }

    let mut table = SampleTable { group_names: Vec::new(), rows: Vec::new(), lines: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() < 3 || record.len() > 4 {
            return Err(parse_err(format!("expected 3 or 4 fields, got {}", record.len())));
        }
        let name = &record[0];
        if name.is_empty() {
            return Err(parse_err("empty group".into()));
        }
        let group = match table.group_names.iter().position(|g| g == name) {
            Some(id) => id,
            None => {
                table.group_names.push(name.to_string());
                table.group_names.len() - 1
            }
        };
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid score_or_pred {:?}", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(format!("non-finite score {value}")));
        }
        let outcome = match &record[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("outcome must be 0 or 1, got {other:?}"))),
        };
        let weight = match record.get(3) {
            None | Some("") => 1.0,
            Some(w) => w.parse().map_err(|_| parse_err(format!("invalid weight {w:?}")))?,
        };
        check_weight(weight).map_err(|e| parse_err(e.to_string()))?;
        table.rows.push(ScoreSample::new(group, value, outcome, weight));
        table.lines.push(line);
    }
    if table.rows.is_empty() {
        return Err(Error::invalid("no data rows"));
    }
    Ok(table)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse { line, message: err.to_string() }
}
