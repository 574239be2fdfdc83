//! Distance-decrement audit of run artifacts.
//!
//! The left side `d(x_n,S)² - d(x_{n+1},S)²` is recomputed from the `dist_S`
//! column, so the check does not trust the recorded `decrement_lhs`.

use std::fs;
use std::path::{Path, PathBuf};

use modelavg_core::simulator::decrement_holds;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub round: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub rounds_checked: usize,
    pub violations: Vec<AuditRow>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// `Err(AuditViolation)` if any round failed.
    pub fn into_result(self) -> Result<Self, CliError> {
        match self.violations.first() {
            None => Ok(self),
            Some(first) => Err(CliError::AuditViolation {
                count: self.violations.len(),
                first_round: first.round,
            }),
        }
    }
}

fn artifact(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Artifact {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_cell(path: &Path, row: usize, name: &str, cell: &str) -> Result<Option<f64>, CliError> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| artifact(path, format!("row {row}: {name} = {cell:?} is not a number")))
}

/// Audits `rounds.csv` content.
pub fn audit_rounds_csv(text: &str, path: &Path) -> Result<AuditReport, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| artifact(path, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| artifact(path, format!("missing column {name}")))
    };
    let (c_round, c_dist, c_rhs) = (col("round")?, col("dist_S")?, col("decrement_rhs")?);

    let mut rows: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| artifact(path, e.to_string()))?;
        let round: usize = rec[c_round]
            .parse()
            .map_err(|_| artifact(path, format!("row {k}: bad round index")))?;
        rows.push((
            round,
            parse_cell(path, k, "dist_S", &rec[c_dist])?,
            parse_cell(path, k, "decrement_rhs", &rec[c_rhs])?,
        ));
    }
    if rows.is_empty() || rows.iter().any(|r| r.1.is_none()) {
        return Err(CliError::UnsupportedAudit(format!(
            "{} has no dist_S values",
            path.display()
        )));
    }

    let mut report = AuditReport {
        rounds_checked: 0,
        violations: Vec::new(),
    };
    for pair in rows.windows(2) {
        let (round, d_now, rhs) = pair[0];
        let d_next = pair[1].1.expect("checked above");
        let d_now = d_now.expect("checked above");
        let Some(rhs) = rhs else {
            return Err(artifact(path, format!("round {round}: missing decrement_rhs")));
        };
        let lhs = d_now * d_now - d_next * d_next;
        report.rounds_checked += 1;
        if !decrement_holds(lhs, rhs, d_now * d_now) {
            report.violations.push(AuditRow {
                round,
                lhs,
                rhs,
                satisfied: false,
            });
        }
    }
    Ok(report)
}

/// Audits the `rounds.csv` referenced by a `run.json`.
pub fn audit_run(run_json: &Path) -> Result<AuditReport, CliError> {
    let text = fs::read_to_string(run_json).map_err(|e| CliError::io(run_json, e))?;
    let meta: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| artifact(run_json, e.to_string()))?;
    let csv_name = meta
        .get("rounds_csv")
        .and_then(|v| v.as_str())
        .ok_or_else(|| artifact(run_json, "missing rounds_csv"))?;
    let csv_path: PathBuf = run_json
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(csv_name);
    let csv_text = fs::read_to_string(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    audit_rounds_csv(&csv_text, &csv_path)
}
