//! Run records and their on-disk layout: `<out>/<name>/record.json` plus
//! `series/*.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use ks_radial::estimates::{ExponentBundle, GradientEnvelopeReport, ZResidualReport};
use ks_radial::ks::{HypothesisReport, Termination};
use ks_radial::linear::{BoundCheck, RadialGradientCheck, TimeScheme, W1pReport};
use ks_radial::profile::{BlowupEvent, ProfileReport};
use ks_radial::semigroup::DecayFit;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Bumped whenever a field of [`RunRecord`] or a CSV column changes.
pub const SCHEMA_VERSION: u32 = 1;
pub const RECORD_FILE: &str = "record.json";
pub const SERIES_DIR: &str = "series";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Recorded for context; never fails a run.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: detail.into(),
        }
    }

    pub fn info(name: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            status: CheckStatus::Info,
            detail: detail.into(),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub cells: usize,
    pub clustering: f64,
    /// Fixed step of linear parabolic runs.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeInfo {
    pub grid: String,
    pub time_scheme: Option<TimeScheme>,
    pub levels: Vec<LevelInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub n: usize,
    pub q: f64,
    pub source: String,
    /// `lhs / rhs` per refinement level.
    pub slack: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cases: Vec<SuiteCase>,
    pub passed: usize,
    /// Largest `lhs / rhs` over the suite, per level.
    pub max_slack: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBound {
    pub cells: usize,
    pub q: f64,
    pub check: BoundCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGradient {
    pub cells: usize,
    pub bound: f64,
    pub check: RadialGradientCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZLevel {
    pub cells: usize,
    pub dt: f64,
    pub report: ZResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub exponent: f64,
    pub per_level: Vec<f64>,
    pub mesh_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsLevel {
    pub cells: usize,
    pub termination: Termination,
    pub final_time: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub initial_sup: f64,
    pub max_sup: f64,
    pub min_u: f64,
    pub max_mass_drift: f64,
    pub snapshots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinftyReport {
    pub sigma: u8,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub bound: f64,
}

/// Every report a scenario can produce; unused ones stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reports {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_v_suite: Option<SuiteReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta_v: Vec<LevelBound>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radial_gradient: Vec<LevelGradient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1p: Option<W1pReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gradient_envelope: Vec<GradientEnvelopeReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub z_residual: Vec<ZLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_space: Option<HolderReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_time: Option<HolderReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ks_levels: Vec<KsLevel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<ProfileReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linfty: Option<LinftyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub code_version: String,
    /// TOML echo of the configuration after defaults were filled in.
    pub config: String,
    pub scheme: SchemeInfo,
    pub exponents: Option<ExponentBundle>,
    pub termination: Option<Termination>,
    pub blowup: Option<BlowupEvent>,
    pub reports: Reports,
    pub checks: Vec<CheckOutcome>,
    /// Paths relative to the record directory.
    pub series: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(CheckOutcome::failed)
    }

    /// JSON without the wall-clock field, identical across repeated runs.
    pub fn payload_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_clock_seconds = 0.0;
        serde_json::to_string_pretty(&copy).expect("records serialize")
    }
}

/// A plot-ready table written as `series/<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        SeriesTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{SERIES_DIR}/{}.csv", self.name)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        w.write_record(&self.columns).map_err(|e| HarnessError::csv(path, e))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x:e}")))
                .map_err(|e| HarnessError::csv(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }
}

/// Record plus the series it references, before persistence.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub tables: Vec<SeriesTable>,
}

impl RunOutput {
    /// Writes `record.json` and the series into `dir`, creating it.
    pub fn persist(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let series = dir.join(SERIES_DIR);
        fs::create_dir_all(&series).map_err(|e| HarnessError::io(&series, e))?;
        for t in &self.tables {
            t.write(&dir.join(t.file_name()))?;
        }
        let path = dir.join(RECORD_FILE);
        let json = serde_json::to_string_pretty(&self.record).expect("records serialize");
        fs::write(&path, json).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

/// Reads a record, rejecting other schema versions.
pub fn load_record(path: &Path) -> Result<RunRecord, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(HarnessError::SchemaMismatch {
            expected: SCHEMA_VERSION,
            files: vec![(path.to_path_buf(), version)],
        });
    }
    serde_json::from_value(value).map_err(|e| HarnessError::json(path, e))
}
