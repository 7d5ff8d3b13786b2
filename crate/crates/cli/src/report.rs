//! CSV tables, run manifests, and the pass/fail summary.
//!
//! Every CSV row starts with the seed and the config hash, columns are in
//! a fixed documented order, and numbers are written with the shortest
//! round-trip formatting, so identical (config, seed) runs produce
//! byte-identical files regardless of the worker-thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// One acceptance-style check evaluated by an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    /// Positive margin = pass distance; negative = violation size.
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    /// statistic <= threshold.
    pub fn upper(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            statistic,
            threshold,
            margin: threshold - statistic,
            pass: statistic <= threshold,
        }
    }

    /// statistic >= threshold.
    pub fn lower(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            statistic,
            threshold,
            margin: statistic - threshold,
            pass: statistic >= threshold,
        }
    }
}

/// In-memory CSV table with fixed columns.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row arity mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Number formatting used in CSV cells: shortest round-trip.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Results of one experiment run, ready to be persisted.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub svgs: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub version: String,
    pub wall_seconds: f64,
    pub csv_files: Vec<String>,
    pub svg_files: Vec<String>,
    pub checks: Vec<Check>,
}

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Writes tables, plots, and the manifest into `dir`.
pub fn persist(
    dir: &Path,
    kind: &str,
    seed: u64,
    config_hash: &str,
    config: serde_json::Value,
    wall_seconds: f64,
    output: &RunOutput,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv_files = Vec::new();
    for table in &output.tables {
        let file = format!("{}.csv", table.name);
        fs::write(dir.join(&file), table.to_csv())?;
        csv_files.push(file);
    }
    let mut svg_files = Vec::new();
    for (name, body) in &output.svgs {
        let file = format!("{name}.svg");
        fs::write(dir.join(&file), body)?;
        svg_files.push(file);
    }
    let manifest = Manifest {
        kind: kind.to_string(),
        seed,
        config_hash: config_hash.to_string(),
        config,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_seconds,
        csv_files,
        svg_files,
        checks: output.checks.clone(),
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

/// One row of the summary table.
#[derive(Clone, Debug)]
pub enum SummaryRow {
    Check {
        kind: String,
        check: Check,
    },
    Skip {
        path: PathBuf,
        reason: String,
    },
}

/// Collects manifests under `dir` (the directory itself or one level of
/// subdirectories). Corrupted manifests produce skip rows, not errors.
pub fn summarize(dir: &Path) -> std::io::Result<Vec<SummaryRow>> {
    let mut manifest_paths = Vec::new();
    let direct = dir.join(MANIFEST_FILE);
    if direct.is_file() {
        manifest_paths.push(direct);
    }
    if dir.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(dir)?.filter_map(|e| e.ok()).collect();
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let p = entry.path().join(MANIFEST_FILE);
            if p.is_file() {
                manifest_paths.push(p);
            }
        }
    }
    let mut rows = Vec::new();
    for path in manifest_paths {
        match fs::read_to_string(&path) {
            Ok(body) => match serde_json::from_str::<Manifest>(&body) {
                Ok(manifest) => {
                    for check in manifest.checks {
                        rows.push(SummaryRow::Check {
                            kind: manifest.kind.clone(),
                            check,
                        });
                    }
                }
                Err(e) => rows.push(SummaryRow::Skip {
                    path,
                    reason: format!("corrupted manifest: {e}"),
                }),
            },
            Err(e) => rows.push(SummaryRow::Skip {
                path,
                reason: format!("unreadable manifest: {e}"),
            }),
        }
    }
    Ok(rows)
}

/// Renders the summary table; returns true iff no check failed.
pub fn render_summary(rows: &[SummaryRow]) -> (String, bool) {
    let mut out = String::new();
    let mut all_pass = true;
    let _ = writeln!(
        out,
        "{:<16} {:<44} {:>12} {:>12} {:>12} {:>6}",
        "kind", "check", "statistic", "threshold", "margin", "status"
    );
    for row in rows {
        match row {
            SummaryRow::Check { kind, check } => {
                if !check.pass {
                    all_pass = false;
                }
                let _ = writeln!(
                    out,
                    "{:<16} {:<44} {:>12.5} {:>12.5} {:>12.5} {:>6}",
                    kind,
                    check.name,
                    check.statistic,
                    check.threshold,
                    check.margin,
                    if check.pass { "PASS" } else { "FAIL" }
                );
            }
            SummaryRow::Skip { path, reason } => {
                let _ = writeln!(
                    out,
                    "{:<16} {:<44} {:>12} {:>12} {:>12} {:>6}",
                    "-",
                    format!("{} ({reason})", path.display()),
                    "-",
                    "-",
                    "-",
                    "SKIP"
                );
            }
        }
    }
    (out, all_pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![num(1.5), num(f64::INFINITY)]);
        let csv = t.to_csv();
        assert_eq!(csv, "a,b\n1.5,inf\n");
    }

    #[test]
    fn checks() {
        let c = Check::upper("x", 1.0, 2.0);
        assert!(c.pass && (c.margin - 1.0).abs() < 1e-12);
        let c = Check::lower("y", 1.0, 2.0);
        assert!(!c.pass);
    }

    #[test]
    fn summarize_empty_dir() {
        let dir = std::env::temp_dir().join(format!("brwlab-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let rows = summarize(&dir).unwrap();
        assert!(rows.is_empty());
        let (text, ok) = render_summary(&rows);
        assert!(ok);
        assert!(text.contains("check"));
        let _ = fs::remove_dir_all(&dir);
    }
}
