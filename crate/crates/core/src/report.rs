//! Analysis reports and their JSON / text forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::Expectation;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// The check does not apply to this kind of model.
    Inapplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inapplicable => "inapplicable",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(Self::Pass),
            "fail" => Some(Self::Fail),
            "inapplicable" => Some(Self::Inapplicable),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub check: String,
    pub verdict: Option<bool>,
    pub value: Option<f64>,
    /// Only present when the verdict is not negative; then it is at most
    /// `tolerance`. Residuals behind a negative verdict live in `detail`.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectation>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
    /// Wall-clock time; excluded from reproducibility comparisons.
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub entry: String,
    pub records: Vec<Record>,
    pub status: Status,
}

impl AnalysisReport {
    pub fn new(entry: impl Into<String>, records: Vec<Record>) -> Self {
        let status = if records.iter().any(|r| r.status == Status::Fail) { Status::Fail } else { Status::Pass };
        Self { schema: REPORT_SCHEMA, entry: entry.into(), records, status }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn clear_timing(&mut self) {
        self.records.iter_mut().for_each(|r| r.runtime_ms = 0.0);
    }
}

/// Reports for several entries (the full catalog run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub seed: u64,
    pub reports: Vec<AnalysisReport>,
    pub status: Status,
}

impl SuiteReport {
    pub fn new(seed: u64, reports: Vec<AnalysisReport>) -> Self {
        let status = if reports.iter().all(AnalysisReport::passed) { Status::Pass } else { Status::Fail };
        Self { schema: REPORT_SCHEMA, seed, reports, status }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn clear_timing(&mut self) {
        self.reports.iter_mut().for_each(AnalysisReport::clear_timing);
    }
}

pub fn to_json<S: Serialize>(report: &S) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn opt_bool(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "-",
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:e}"))
}

/// One header line per entry, one line per record.
pub fn to_text(reports: &[AnalysisReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "entry {} {}", r.entry, r.status.as_str().to_uppercase());
        for rec in &r.records {
            let _ = write!(
                out,
                "  {:<26} {:<12} verdict={} value={} residual={} tol={:e} seed={}",
                rec.check,
                rec.status.as_str(),
                opt_bool(rec.verdict),
                opt_num(rec.value),
                opt_num(rec.residual),
                rec.tolerance,
                rec.seed
            );
            if let Some(msg) = rec.detail.get("error").and_then(Value::as_str) {
                let _ = write!(out, "  ({msg})");
            }
            out.push('\n');
        }
    }
    out
}

/// `(entry, check, verdict, status)` read back from [`to_text`] output.
pub fn verdicts_from_text(text: &str) -> Vec<(String, String, Option<bool>, Status)> {
    let mut out = Vec::new();
    let mut entry = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("entry ") {
            entry = rest.split_whitespace().next().unwrap_or_default().to_string();
            continue;
        }
        let mut words = line.split_whitespace();
        let (Some(check), Some(status)) = (words.next(), words.next()) else { continue };
        let Some(status) = Status::parse(status) else { continue };
        let verdict = words.find_map(|w| w.strip_prefix("verdict=")).and_then(|v| match v {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        });
        out.push((entry.clone(), check.to_string(), verdict, status));
    }
    out
}

pub fn verdicts(reports: &[AnalysisReport]) -> Vec<(String, String, Option<bool>, Status)> {
    reports
        .iter()
        .flat_map(|r| r.records.iter().map(move |x| (r.entry.clone(), x.check.clone(), x.verdict, x.status)))
        .collect()
}
