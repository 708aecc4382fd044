use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use freeknot::mc::{EstimateWithError, RateFit};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, Settings};
use crate::RunError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl From<EstimateWithError> for Estimate {
    fn from(e: EstimateWithError) -> Self {
        Estimate { value: e.mean, std_error: Some(e.std_error) }
    }
}

impl From<f64> for Estimate {
    fn from(value: f64) -> Self {
        Estimate { value, std_error: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    /// Slope predicted by the asymptotics, when there is one.
    pub expected_slope: Option<f64>,
}

impl Fit {
    pub fn new(f: &RateFit, expected_slope: Option<f64>) -> Self {
        Fit { slope: f.slope, slope_stderr: f.slope_stderr, intercept: f.intercept, expected_slope }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Header line plus one line per row, floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub experiment: String,
    pub status: Status,
    pub error: Option<String>,
    pub seed: u64,
    pub config: Settings,
    pub estimates: BTreeMap<String, Estimate>,
    pub fits: BTreeMap<String, Fit>,
    pub table: Table,
    pub notes: Vec<String>,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn new(experiment: Experiment, seed: u64, config: Settings) -> Self {
        ExperimentReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.name().to_string(),
            status: Status::Ok,
            error: None,
            seed,
            config,
            estimates: BTreeMap::new(),
            fits: BTreeMap::new(),
            table: Table::default(),
            notes: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn estimate(&mut self, name: &str, e: impl Into<Estimate>) {
        self.estimates.insert(name.to_string(), e.into());
    }

    pub fn fail(&mut self, err: &RunError) {
        self.status = Status::Failed;
        self.error = Some(err.to_string());
    }

    /// Writes `<dir>/<experiment>.json`, and `<dir>/<experiment>.csv` when
    /// `csv` is set. Returns the paths written.
    pub fn write(&self, dir: &Path, csv: bool) -> Result<Vec<PathBuf>, RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        let json_path = dir.join(format!("{}.json", self.experiment));
        let text = serde_json::to_string_pretty(self).expect("reports serialize");
        std::fs::write(&json_path, text + "\n").map_err(|e| RunError::io(&json_path, e))?;
        let mut out = vec![json_path];
        if csv {
            let csv_path = dir.join(format!("{}.csv", self.experiment));
            std::fs::write(&csv_path, self.table.to_csv()).map_err(|e| RunError::io(&csv_path, e))?;
            out.push(csv_path);
        }
        Ok(out)
    }
}
