//! Run outputs: checks, CSV tables, manifest and summary.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::spec::{ExperimentId, ExperimentSpec};
use crate::error::Result;

/// One pass/fail comparison of a measured value against a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub relation: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    #[must_use]
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            relation: "<=".into(),
            // NaN fails
            passed: measured <= threshold,
            detail: String::new(),
        }
    }

    #[must_use]
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            relation: ">=".into(),
            passed: measured >= threshold,
            detail: String::new(),
        }
    }

    #[must_use]
    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// A CSV table; values are formatted when rows are pushed.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    #[must_use]
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Rows of `t,quantity,mean,stderr,replicas`.
    pub fn estimate(&mut self, t: f64, quantity: &str, mean: f64, stderr: f64, replicas: u64) {
        self.push(vec![
            t.to_string(),
            quantity.to_owned(),
            mean.to_string(),
            stderr.to_string(),
            replicas.to_string(),
        ]);
    }
}

/// Formats a row of numbers.
#[must_use]
pub fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(f64::to_string).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
    /// Headline numbers that are not checks.
    pub metrics: Vec<(String, f64)>,
}

impl Outcome {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: ExperimentId,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentId,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub spec: ExperimentSpec,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub summary: Summary,
    pub manifest: Manifest,
    pub tables: Vec<Table>,
}

impl RunReport {
    #[must_use]
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    /// Writes `manifest.json`, `summary.json` and one CSV per table.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            fs::write(&p, t.to_csv())?;
            written.push(p);
        }
        let p = dir.join("summary.json");
        fs::write(&p, serde_json::to_string_pretty(&self.summary)? + "\n")?;
        written.push(p);
        let p = dir.join("manifest.json");
        fs::write(&p, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        written.push(p);
        Ok(written)
    }

    /// Human-readable check listing.
    #[must_use]
    pub fn render(&self) -> String {
        let s = &self.summary;
        let mut out = format!("{} {}: {}\n", s.experiment, if s.passed { "PASS" } else { "FAIL" }, s.title);
        for c in &s.checks {
            let _ = writeln!(
                out,
                "  [{}] {}: {:.6e} {} {:.6e}{}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.relation,
                c.threshold,
                if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) }
            );
        }
        for (k, v) in &s.metrics {
            let _ = writeln!(out, "  {k} = {v:.6e}");
        }
        for w in &s.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("x", f64::NAN, 1.0).passed);
        assert!(Check::at_most("x", 1.0, 1.0).passed);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("rw", &["N", "t", "quantity", "value"]);
        t.push(vec!["8".into(), "0.5".into(), "local_time".into(), "0.25".into()]);
        assert_eq!(t.to_csv(), "N,t,quantity,value\n8,0.5,local_time,0.25\n");
    }
}
