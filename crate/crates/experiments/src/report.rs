//! Result rows, acceptance checks, and their CSV / JSON serializations.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Experiment;

pub const CSV_HEADER: &str = "experiment,eps,n,replicate,estimator,estimate,oracle,error,ess_min";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub eps: f64,
    pub n: usize,
    /// `None` for deterministic oracle rows.
    pub replicate: Option<usize>,
    pub estimator: String,
    pub estimate: f64,
    pub oracle: f64,
    pub ess_min: Option<f64>,
}

impl ResultRow {
    pub fn error(&self) -> f64 {
        self.estimate - self.oracle
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let replicate = r.replicate.map(|k| k.to_string()).unwrap_or_default();
        let ess = r.ess_min.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            fmt_f64(r.eps),
            r.n,
            replicate,
            r.estimator,
            fmt_f64(r.estimate),
            fmt_f64(r.oracle),
            fmt_f64(r.error()),
            ess
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub requirement: String,
    pub measured: Map<String, Value>,
}

impl Check {
    pub fn new(name: &str, passed: bool, requirement: impl Into<String>, measured: &[(&str, f64)]) -> Self {
        let measured = measured
            .iter()
            .map(|(k, v)| ((*k).to_owned(), serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number)))
            .collect();
        Check { name: name.to_owned(), passed, requirement: requirement.into(), measured }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub rows: Vec<ResultRow>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn summary_json(reports: &[Report]) -> Value {
    let experiments: Vec<Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "experiment": r.experiment.label(),
                "passed": r.passed(),
                "rows": r.rows.len(),
                "checks": r.checks,
            })
        })
        .collect();
    serde_json::json!({
        "passed": reports.iter().all(Report::passed),
        "experiments": experiments,
    })
}

/// Writes the CSV to `csv_path` and `summary.json` next to it.
pub fn write_outputs(csv_path: &Path, reports: &[Report]) -> io::Result<()> {
    let with_path = |e: io::Error, p: &Path| io::Error::new(e.kind(), format!("{}: {e}", p.display()));
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| with_path(e, dir))?;
    }
    let rows: Vec<ResultRow> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    std::fs::write(csv_path, to_csv(&rows)).map_err(|e| with_path(e, csv_path))?;
    let summary_path = csv_path.with_file_name("summary.json");
    let mut text = serde_json::to_string_pretty(&summary_json(reports)).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(&summary_path, text).map_err(|e| with_path(e, &summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            experiment: Experiment::FigureA,
            eps: 0.05,
            n: 50,
            replicate: Some(3),
            estimator: "paris".into(),
            estimate: 1.5,
            oracle: 1.0,
            ess_min: Some(200.0),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&[row(), ResultRow { replicate: None, ess_min: None, ..row() }]);
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "figure-a,5.0000000000000003e-2,50,3,paris,1.5000000000000000e0,1.0000000000000000e0,5.0000000000000000e-1,2.0000000000000000e2"
        );
        assert!(lines[2].ends_with(",5.0000000000000000e-1,"));
        assert_eq!(lines[3], "");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn summary_shape() {
        let rep = Report {
            experiment: Experiment::DgCheck,
            rows: vec![row()],
            checks: vec![Check::new("a", true, "x", &[("v", 1.0)]), Check::new("b", false, "y", &[("w", f64::NAN)])],
        };
        let v = summary_json(&[rep]);
        assert_eq!(v["passed"], false);
        assert_eq!(v["experiments"][0]["experiment"], "dg-check");
        assert_eq!(v["experiments"][0]["checks"][0]["measured"]["v"], 1.0);
        assert!(v["experiments"][0]["checks"][1]["measured"]["w"].is_null());
    }
}
