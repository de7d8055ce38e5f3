//! Experiment reports and their JSON/CSV artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{ExperimentError, Result};

/// Mean and sample variance (`n - 1` denominator; zero for one draw).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
}

impl Summary {
    pub fn of(draws: &[f64]) -> Self {
        if draws.is_empty() {
            return Self {
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let variance = if draws.len() > 1 {
            draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, variance }
    }
}

/// One configuration of one method, with every per-simulation draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: String,
    pub variant: String,
    pub epsilon: Option<f64>,
    pub sims: usize,
    pub metrics: BTreeMap<String, Summary>,
    /// Draws of the `delta` metric above this count as violations.
    pub violation_threshold: Option<f64>,
    pub violation_pct: Option<f64>,
    pub raw: BTreeMap<String, Vec<f64>>,
}

impl Cell {
    pub fn new(
        method: impl Into<String>,
        variant: impl Into<String>,
        epsilon: Option<f64>,
        raw: BTreeMap<String, Vec<f64>>,
    ) -> Self {
        let sims = raw.values().next().map_or(0, Vec::len);
        debug_assert!(raw.values().all(|v| v.len() == sims));
        Self {
            method: method.into(),
            variant: variant.into(),
            epsilon,
            sims,
            metrics: raw
                .iter()
                .map(|(k, v)| (k.clone(), Summary::of(v)))
                .collect(),
            violation_threshold: None,
            violation_pct: None,
            raw,
        }
    }

    /// Percentage of `metric` draws strictly above `threshold`.
    pub fn with_violations(mut self, metric: &str, threshold: f64) -> Self {
        let draws = &self.raw[metric];
        let count = draws.iter().filter(|d| **d > threshold).count();
        self.violation_threshold = Some(threshold);
        self.violation_pct = Some(100.0 * count as f64 / draws.len() as f64);
        self
    }

    pub fn draws(&self, metric: &str) -> &[f64] {
        self.raw.get(metric).map_or(&[], Vec::as_slice)
    }

    pub fn mean(&self, metric: &str) -> f64 {
        self.metrics.get(metric).map_or(f64::NAN, |s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub crate_version: String,
    pub git_revision: Option<String>,
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(master_seed: u64, notes: Vec<String>) -> Self {
        Self {
            master_seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            git_revision: git_revision(),
            notes,
        }
    }
}

fn git_revision() -> Option<String> {
    let out = Command::new("git")
        .args(["rev-parse", "HEAD"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub cells: Vec<Cell>,
}

impl ExperimentReport {
    pub fn cell(&self, method: &str, variant: &str, epsilon: Option<f64>) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.variant == variant && c.epsilon == epsilon)
    }

    /// Flat per-cell table: one row per cell, mean and variance per metric.
    pub fn to_csv(&self) -> Result<String> {
        let metric_names: Vec<&String> = {
            let mut names: Vec<&String> =
                self.cells.iter().flat_map(|c| c.metrics.keys()).collect();
            names.sort();
            names.dedup();
            names
        };
        let with_violations = self.cells.iter().any(|c| c.violation_pct.is_some());
        let mut header = vec![
            "experiment".to_string(),
            "method".into(),
            "variant".into(),
            "epsilon".into(),
            "sims".into(),
        ];
        for name in &metric_names {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_variance"));
        }
        if with_violations {
            header.push("violation_pct".into());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |source| ExperimentError::Csv {
            path: PathBuf::from("<report>"),
            source,
        };
        w.write_record(&header).map_err(to_err)?;
        for cell in &self.cells {
            let mut record = vec![
                self.experiment.to_string(),
                cell.method.clone(),
                cell.variant.clone(),
                cell.epsilon.map(|e| e.to_string()).unwrap_or_default(),
                cell.sims.to_string(),
            ];
            for name in &metric_names {
                match cell.metrics.get(*name) {
                    Some(s) => {
                        record.push(s.mean.to_string());
                        record.push(s.variance.to_string());
                    }
                    None => record.extend([String::new(), String::new()]),
                }
            }
            if with_violations {
                record.push(
                    cell.violation_pct
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                );
            }
            w.write_record(&record).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| ExperimentError::Io {
            path: PathBuf::from("<report>"),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub json: PathBuf,
    pub csv: PathBuf,
}

/// Write `<dir>/<experiment>.json` (everything) and `<dir>/<experiment>.csv`
/// (per-cell aggregates).
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Artifacts> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = dir.join(format!("{}.json", report.experiment));
    let csv = dir.join(format!("{}.csv", report.experiment));
    let text = serde_json::to_string_pretty(report).map_err(|source| ExperimentError::Json {
        path: json.clone(),
        source,
    })?;
    write_file(&json, text.as_bytes())?;
    write_file(&csv, report.to_csv()?.as_bytes())?;
    Ok(Artifacts { json, csv })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}
