//! Report rows and their CSV / JSON serializations.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ReportFormat;

pub const CSV_HEADER: &str = "example,alpha,H,h,m_trial,L_test,eigenproblem,online_iter,err_ms_pct,err_proj_pct,w_norm,min_lambda_excluded,infsup_est";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub example: u8,
    pub alpha: f64,
    #[serde(rename = "H")]
    pub coarse_h: f64,
    #[serde(rename = "h")]
    pub fine_h: f64,
    pub m_trial: usize,
    #[serde(rename = "L_test")]
    pub l_test: usize,
    pub eigenproblem: u8,
    pub online_iter: usize,
    pub err_ms_pct: f64,
    pub err_proj_pct: f64,
    pub w_norm: f64,
    /// `None` when every edge keeps all of its eigenvectors.
    pub min_lambda_excluded: Option<f64>,
    #[serde(rename = "infsup_est")]
    pub infsup: Option<f64>,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6e},{},{}",
            self.example,
            self.alpha,
            self.coarse_h,
            self.fine_h,
            self.m_trial,
            self.l_test,
            self.eigenproblem,
            self.online_iter,
            self.err_ms_pct,
            self.err_proj_pct,
            self.w_norm,
            opt(self.min_lambda_excluded),
            opt(self.infsup),
        )
    }
}

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s += &r.csv_line();
        s.push('\n');
    }
    s
}

pub fn to_json(rows: &[ReportRow]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)? + "\n")
}

pub fn from_json(text: &str) -> Result<Vec<ReportRow>> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => Ok(to_csv(rows)),
        ReportFormat::Json => to_json(rows),
    }
}

/// Write the report to `path`, or to standard output when `path` is `None`.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat, path: Option<&Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("no report rows to emit".into()));
    }
    let text = render(rows, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
