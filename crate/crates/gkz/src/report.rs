//! Machine-readable report files and their text rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gkz_core::periods::FunctionKind;
use gkz_core::system::format_complex;
use gkz_core::verifier::ResidualReport;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "gkz";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

impl ScenarioEcho {
    pub fn new(name: &str, path: &Path, bytes: &[u8]) -> Self {
        ScenarioEcho {
            name: name.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsEcho {
    pub degree_bound: u32,
    pub threshold: f64,
    pub seed: u64,
    pub points: usize,
    pub perturbation: f64,
    pub radius_factor: f64,
    pub nodes: usize,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupted_eigenvalue: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub index: usize,
    pub coefficients: Vec<[f64; 2]>,
    pub value: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One (point, operator) cell. Numbers are stored as formatted strings so the
/// table is byte-stable across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub point: usize,
    pub operator: String,
    pub raw: String,
    pub normalization: String,
    pub relative: String,
    pub two_radius_disagreement: String,
    pub degenerate: bool,
    pub unreliable: bool,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub kind: String,
    pub scenario: ScenarioEcho,
    pub function: String,
    pub system: String,
    pub settings: SettingsEcho,
    pub points: Vec<PointEntry>,
    pub residuals: Vec<ResidualRow>,
    pub max_relative: String,
    pub evaluation_errors: usize,
    pub passed: bool,
    pub notes: Vec<String>,
    pub timing_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub kind: String,
    pub scenario: ScenarioEcho,
    pub function: String,
    pub coefficients: Vec<[f64; 2]>,
    pub value: [f64; 2],
    pub error_estimate: f64,
    pub timing_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReportFile {
    Verify(VerifyReport),
    Period(PeriodReport),
}

pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.6e}")
    }
}

pub fn function_name(kind: &FunctionKind) -> &'static str {
    match kind {
        FunctionKind::Period(_) => "period",
        FunctionKind::Root { .. } => "root",
        FunctionKind::GlResidue => "gl_residue",
    }
}

/// Standing remarks about how eigenvalues were assigned.
pub fn notes_for(kind: &FunctionKind, has_exp: bool) -> Vec<String> {
    let mut notes = Vec::new();
    match kind {
        FunctionKind::Root { .. } => notes.push(
            "root function: indicator eigenvalue 0 and exponent eigenvalue -1 come from the scaling identities \
             x(t·a) = x(a) and x(a0, t·a1, ..., t^d·ad) = x(a)/t"
                .into(),
        ),
        FunctionKind::GlResidue => {
            notes.push("residue sum: the factor is g = 1/z, so its indicator eigenvalue is -1".into())
        }
        FunctionKind::Period(_) => {}
    }
    if has_exp {
        notes.push("exp factors contribute no indicator row (confluent case)".into());
    }
    notes.push("exponent rows store -β; both values are printed in the system listing".into());
    notes.push("thresholds are engineering choices; residuals are reported, not proven".into());
    notes
}

pub fn residual_rows(report: &ResidualReport) -> Vec<ResidualRow> {
    let mut rows = Vec::new();
    for (k, p) in report.points.iter().enumerate() {
        for c in &p.cells {
            rows.push(ResidualRow {
                point: k + 1,
                operator: c.operator.clone(),
                raw: sci(c.raw),
                normalization: sci(c.normalization),
                relative: sci(c.relative),
                two_radius_disagreement: sci(c.disagreement),
                degenerate: c.degenerate,
                unreliable: c.unreliable,
                passed: c.passed,
                error: c.error.clone(),
            });
        }
    }
    rows
}

pub fn point_entries(report: &ResidualReport) -> Vec<PointEntry> {
    report
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| PointEntry {
            index: k + 1,
            coefficients: p.point.iter().map(|&z| pair(z)).collect(),
            value: p.value.map(pair),
            error: p.error.clone(),
        })
        .collect()
}

impl ReportFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Invalid { path: "report".into(), message: e.to_string() })?;
        let kind = value.get("kind").and_then(|k| k.as_str()).unwrap_or_default().to_string();
        let bad = |e: serde_json::Error| CliError::Invalid { path: "report".into(), message: e.to_string() };
        match kind.as_str() {
            "verify" => Ok(ReportFile::Verify(serde_json::from_value(value).map_err(bad)?)),
            "period" => Ok(ReportFile::Period(serde_json::from_value(value).map_err(bad)?)),
            other => {
                Err(CliError::Invalid { path: "report.kind".into(), message: format!("unknown report kind {other:?}") })
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = match self {
            ReportFile::Verify(r) => serde_json::to_string_pretty(r),
            ReportFile::Period(r) => serde_json::to_string_pretty(r),
        }
        .expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
    }

    pub fn render(&self) -> String {
        match self {
            ReportFile::Verify(r) => render_verify(r),
            ReportFile::Period(r) => render_period(r),
        }
    }
}

fn complex_of(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn render_period(r: &PeriodReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {} ({})", r.scenario.name, &r.scenario.sha256[..12.min(r.scenario.sha256.len())]);
    let _ = writeln!(out, "function: {}", r.function);
    let _ = writeln!(out, "value = {}", format_complex(complex_of(r.value)));
    let _ = writeln!(out, "error estimate = {}", sci(r.error_estimate));
    out
}

/// Residual table for the verify output and the `report` command.
pub fn render_verify(r: &VerifyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {} ({})", r.scenario.name, &r.scenario.sha256[..12.min(r.scenario.sha256.len())]);
    let _ = writeln!(
        out,
        "function: {}   seed: {}   threshold: {}",
        r.function,
        r.settings.seed,
        sci(r.settings.threshold)
    );
    if let Some(k) = r.settings.corrupted_eigenvalue {
        let _ = writeln!(out, "eigenvalue of euler operator {k} corrupted by +1");
    }
    let width = r.residuals.iter().map(|row| row.operator.chars().count()).max().unwrap_or(8).max(8);
    for p in &r.points {
        let coords: Vec<String> = p.coefficients.iter().map(|&z| format_complex(complex_of(z))).collect();
        let _ = writeln!(out, "point {}: a = ({})", p.index, coords.join(", "));
        match (&p.value, &p.error) {
            (Some(v), _) => {
                let _ = writeln!(out, "  value = {}", format_complex(complex_of(*v)));
            }
            (None, Some(e)) => {
                let _ = writeln!(out, "  error: {e}");
            }
            _ => {}
        }
        let _ = writeln!(out, "  {:<width$}  {:>13}  {:>13}  {:>13}  status", "operator", "relative", "raw", "norm");
        for row in r.residuals.iter().filter(|row| row.point == p.index) {
            let status = match (&row.error, row.passed, row.degenerate) {
                (Some(e), _, _) => format!("error: {e}"),
                (None, true, true) => "ok (degenerate)".into(),
                (None, true, false) => "ok".into(),
                (None, false, _) => "FAIL".into(),
            };
            let flag = if row.unreliable { " [unreliable derivative]" } else { "" };
            let pad = width.saturating_sub(row.operator.chars().count());
            let _ = writeln!(
                out,
                "  {}{}  {:>13}  {:>13}  {:>13}  {status}{flag}",
                row.operator,
                " ".repeat(pad),
                row.relative,
                row.raw,
                row.normalization
            );
        }
    }
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(out, "max relative residual: {} (threshold {})", r.max_relative, sci(r.settings.threshold));
    let verdict = if r.evaluation_errors > 0 {
        "ERROR"
    } else if r.passed {
        "PASS"
    } else {
        "FAIL"
    };
    let _ = writeln!(out, "result: {verdict}");
    out
}

/// `<dir>/<stem>.<suffix>.json` next to the scenario.
pub fn beside(scenario: &Path, suffix: &str) -> PathBuf {
    let stem = scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
    scenario.with_file_name(format!("{stem}.{suffix}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format_is_fixed_width_mantissa() {
        assert_eq!(sci(1.0), "1.000000e0");
        assert_eq!(sci(3.25e-12), "3.250000e-12");
        assert_eq!(sci(f64::INFINITY), "inf");
    }

    #[test]
    fn report_paths() {
        assert_eq!(beside(Path::new("/x/gauss.json"), "report"), PathBuf::from("/x/gauss.report.json"));
    }
}
