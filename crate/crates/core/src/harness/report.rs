//! Experiment reports and their CSV / JSON forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const CSV_HEADER: &str = "experiment,design_id,n,n_star,M,h,metric,value,se,reps,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub se: f64,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: f64, se: f64) -> Self {
        Self {
            name: name.into(),
            value,
            se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub experiment: String,
    /// Design id, suffixed with `@mu=<mu>` when the experiment sweeps several means.
    pub design_id: String,
    pub n: usize,
    pub mu: f64,
    pub mu_bar: f64,
    pub n_star: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub h: f64,
    pub max_share: f64,
    pub reps: usize,
    /// Master seed of the run.
    pub seed: u64,
    /// Seed of this cell's replication streams.
    pub cell_seed: u64,
    pub metrics: Vec<Metric>,
    pub error: Option<String>,
}

impl CellReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl ExperimentReport {
    pub fn cells_for<'a>(&'a self, experiment: &'a str) -> impl Iterator<Item = &'a CellReport> + 'a {
        self.cells.iter().filter(move |c| c.experiment == experiment)
    }

    pub fn cell(&self, experiment: &str, design_id: &str, n: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.experiment == experiment && c.design_id == design_id && c.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            for m in &c.metrics {
                writeln!(
                    out,
                    "{},{},{},{},{},{:?},{},{:?},{:?},{},{}",
                    c.experiment, c.design_id, c.n, c.n_star, c.m, c.h, m.name, m.value, m.se, c.reps, c.seed
                )
                .expect("writing to a String");
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| LabError::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }
}

pub fn summarize(report: &ExperimentReport, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(report.to_csv()),
        Format::Json => report.to_json(),
    }
}
