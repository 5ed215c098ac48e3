//! Verification reports and CSV/JSON output.

use std::io::Write;
use std::path::Path;

use nonlocal_soliton::residual::ResidualReport;
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;

/// How a check's value is judged against its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Passes when value < tolerance.
    Below,
    /// Passes when value > tolerance.
    Above,
    /// Passes when value == tolerance.
    Equal,
}

impl Comparison {
    fn name(self) -> &'static str {
        match self {
            Comparison::Below => "below",
            Comparison::Above => "above",
            Comparison::Equal => "equal",
        }
    }
}

/// One judged quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub system: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub mean: Option<f64>,
    pub masked_fraction: Option<f64>,
    pub worst_point: Option<(f64, f64)>,
    pub grid: Option<String>,
    pub detail: Option<String>,
}

impl Check {
    fn new(system: &str, name: impl Into<String>, value: f64, tolerance: f64, comparison: Comparison) -> Check {
        let passed = match comparison {
            Comparison::Below => value < tolerance,
            Comparison::Above => value > tolerance,
            Comparison::Equal => value == tolerance,
        };
        Check {
            name: name.into(),
            system: system.to_string(),
            value,
            tolerance,
            comparison,
            passed,
            mean: None,
            masked_fraction: None,
            worst_point: None,
            grid: None,
            detail: None,
        }
    }

    pub fn below(system: &str, name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check::new(system, name, value, tolerance, Comparison::Below)
    }

    pub fn above(system: &str, name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check::new(system, name, value, tolerance, Comparison::Above)
    }

    pub fn equal(system: &str, name: impl Into<String>, value: f64, expected: f64) -> Check {
        Check::new(system, name, value, expected, Comparison::Equal)
    }

    /// Judges the grid maximum of a residual report; an unusable report
    /// (too many masked points) fails regardless of its maximum.
    pub fn from_report(system: &str, r: &ResidualReport, tolerance: f64) -> Check {
        let mut c = Check::below(system, r.equation.clone(), r.max, tolerance);
        c.passed = r.passes(tolerance);
        c.mean = Some(r.mean);
        c.masked_fraction = Some(r.masked_fraction);
        c.worst_point = r.worst_point;
        c.grid = Some(r.grid.to_string());
        c
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

impl Summary {
    pub fn of(checks: &[Check]) -> Summary {
        let passed = checks.iter().filter(|c| c.passed).count();
        Summary { total: checks.len(), passed, failed: checks.len() - passed }
    }
}

/// A verification report; see `docs/report-format.md`.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub system: String,
    pub config: Option<Value>,
    pub grid: Option<String>,
    pub step: Option<f64>,
    pub checks: Vec<Check>,
    pub summary: Summary,
    pub status: &'static str,
}

impl Report {
    pub fn new(command: &str, system: &str, config: Option<Value>, grid: Option<String>, step: Option<f64>, checks: Vec<Check>) -> Report {
        let summary = Summary::of(&checks);
        Report {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            system: system.to_string(),
            config,
            grid,
            step,
            status: if summary.failed == 0 { "pass" } else { "fail" },
            checks,
            summary,
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.failed == 0
    }
}

/// 17 significant digits, lossless for f64.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub const CHECK_COLUMNS: [&str; 12] = [
    "name",
    "system",
    "value",
    "tolerance",
    "comparison",
    "passed",
    "mean",
    "masked_fraction",
    "worst_x",
    "worst_t",
    "grid",
    "detail",
];

pub fn check_record(c: &Check) -> Vec<String> {
    vec![
        c.name.clone(),
        c.system.clone(),
        num(c.value),
        num(c.tolerance),
        c.comparison.name().to_string(),
        c.passed.to_string(),
        opt_num(c.mean),
        opt_num(c.masked_fraction),
        opt_num(c.worst_point.map(|p| p.0)),
        opt_num(c.worst_point.map(|p| p.1)),
        c.grid.clone().unwrap_or_default(),
        c.detail.clone().unwrap_or_default(),
    ]
}

/// Writes a header and records as CSV.
pub fn csv_bytes<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

pub fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn report_bytes(report: &Report, format: Format) -> anyhow::Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(report),
        Format::Csv => csv_bytes(&CHECK_COLUMNS, report.checks.iter().map(check_record)),
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| crate::config::ConfigError(format!("--out: cannot write {}: {e}", p.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Human-readable summary on stderr.
pub fn print_summary(title: &str, checks: &[Check]) {
    for c in checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {} [{}]: {} (tolerance {} {})", c.name, c.system, num(c.value), c.comparison.name(), num(c.tolerance));
    }
    let s = Summary::of(checks);
    eprintln!("{title}: {}/{} checks passed", s.passed, s.total);
}

#[cfg(test)]
mod tests {
    use super::*;
    use nonlocal_soliton::residual::GridSpec;

    #[test]
    fn comparisons() {
        assert!(Check::below("ech", "a", 1e-11, 1e-10).passed);
        assert!(!Check::below("ech", "a", f64::NAN, 1e-10).passed);
        assert!(Check::above("hirota", "b", 0.5, 1e-2).passed);
        assert!(Check::equal("nelle", "c", 2.0, 2.0).passed);
        assert!(!Check::equal("nelle", "c", 3.0, 2.0).passed);
    }

    #[test]
    fn unusable_report_fails() {
        let g = GridSpec::new((0.0, 1.0, 2), (0.0, 1.0, 2)).unwrap();
        let r = ResidualReport::from_samples("eq", &g, None, &[Some(0.0), None, None, None]);
        assert!(!Check::from_report("ech", &r, 1.0).passed);
    }

    #[test]
    fn csv_has_full_precision() {
        let c = Check::below("ech", "x", 0.1, 1e-5);
        let bytes = report_bytes(&Report::new("verify", "ech", None, None, None, vec![c]), Format::Csv).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn json_marks_status() {
        let r = Report::new("verify", "all", None, None, None, vec![Check::below("ech", "x", 1.0, 0.5)]);
        let v: Value = serde_json::from_slice(&report_bytes(&r, Format::Json).unwrap()).unwrap();
        assert_eq!(v["status"], "fail");
        assert_eq!(v["summary"]["failed"], 1);
        assert_eq!(v["checks"][0]["tolerance"], 0.5);
    }
}
