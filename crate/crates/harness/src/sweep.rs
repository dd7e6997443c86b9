//! Regime maps over `(m, q, mass)` grids, one KS run per cell.

use std::fs;
use std::path::Path;

use ks_radial::ks::{InitialData, Termination};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ChecksSpec, ConfigError, ConfigIssue, ScenarioConfig};
use crate::error::HarnessError;
use crate::record::{RunOutput, SCHEMA_VERSION};
use crate::run::execute;

pub const SWEEP_COLUMNS: [&str; 7] = ["m", "q", "mass_multiplier", "verdict", "t_final", "sup_u", "error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVerdict {
    BoundedToTEnd,
    /// Includes runs that stopped on step underflow.
    BlowupDetected,
    /// The run failed; the error is kept with the cell.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m: f64,
    pub q: f64,
    pub mass_multiplier: f64,
    pub verdict: CellVerdict,
    pub t_final: Option<f64>,
    pub sup_u: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub schema_version: u32,
    pub name: String,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        w.write_record(SWEEP_COLUMNS).map_err(|e| HarnessError::csv(path, e))?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        for c in &self.cells {
            let verdict = serde_json::to_value(c.verdict).expect("verdict serializes");
            w.write_record([
                format!("{}", c.m),
                format!("{}", c.q),
                format!("{}", c.mass_multiplier),
                verdict.as_str().unwrap_or_default().to_string(),
                opt(c.t_final),
                opt(c.sup_u),
                c.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| HarnessError::csv(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }
}

/// Configuration of one cell: the base scenario with `m`, `q` and the
/// Gaussian mass replaced, and the checks reduced to mass conservation.
pub fn cell_config(base: &ScenarioConfig, m: f64, q: f64, multiplier: f64) -> Result<ScenarioConfig, ConfigError> {
    let spec = base.sweep.as_ref().ok_or_else(|| ConfigError {
        issues: vec![ConfigIssue::MissingSection {
            section: "sweep".into(),
            reason: "sweeps need a parameter grid".into(),
        }],
    })?;
    let Some(InitialData::Gaussian { width, .. }) = base.initial else {
        return Err(ConfigError {
            issues: vec![ConfigIssue::MissingSection {
                section: "initial".into(),
                reason: "sweeps scale the mass of gaussian initial data".into(),
            }],
        });
    };
    let mut cfg = base.clone();
    cfg.name = format!("{}_m{m}_q{q}_x{multiplier}", base.name);
    cfg.model.m = m;
    cfg.model.q = q;
    cfg.model.k_d1 = None;
    cfg.model.k_d2 = None;
    cfg.model.k_s = None;
    cfg.initial = Some(InitialData::Gaussian {
        mass: multiplier * spec.reference_mass,
        width,
    });
    cfg.checks = ChecksSpec {
        mass_drift_rate: base.checks.mass_drift_rate,
        ..ChecksSpec::default()
    };
    cfg.sweep = None;
    Ok(cfg)
}

fn classify(
    m: f64,
    q: f64,
    mass_multiplier: f64,
    run: Result<RunOutput, HarnessError>,
) -> (SweepCell, Option<RunOutput>) {
    let blank = SweepCell {
        m,
        q,
        mass_multiplier,
        verdict: CellVerdict::Inconclusive,
        t_final: None,
        sup_u: None,
        error: None,
    };
    match run {
        Ok(out) => {
            let level = out.record.reports.ks_levels.last();
            let verdict = match out.record.termination {
                Some(Termination::ReachedTEnd) => CellVerdict::BoundedToTEnd,
                Some(Termination::BlowupDetected | Termination::DtUnderflow) => CellVerdict::BlowupDetected,
                None => CellVerdict::Inconclusive,
            };
            let cell = SweepCell {
                verdict,
                t_final: level.map(|l| l.final_time),
                sup_u: level.map(|l| l.max_sup),
                ..blank
            };
            (cell, Some(out))
        }
        Err(e) => (
            SweepCell {
                error: Some(e.to_string()),
                ..blank
            },
            None,
        ),
    }
}

/// Runs every cell of the base config's sweep grid on a pool of `threads`
/// workers (all cores when `None`). Cell failures are recorded, not raised.
///
/// With `out_root`, each cell persists to `<out_root>/<name>/cells/<cell>`
/// and the table to `<out_root>/<name>/sweep.{csv,json}`.
pub fn sweep(
    base: &ScenarioConfig,
    threads: Option<usize>,
    out_root: Option<&Path>,
) -> Result<SweepTable, HarnessError> {
    let issues = base.validate();
    if !issues.is_empty() {
        return Err(ConfigError { issues }.into());
    }
    let spec = base.sweep.as_ref().ok_or_else(|| ConfigError {
        issues: vec![ConfigIssue::MissingSection {
            section: "sweep".into(),
            reason: "sweeps need a parameter grid".into(),
        }],
    })?;
    let mut grid = Vec::with_capacity(spec.cell_count());
    for &m in &spec.m {
        for &q in &spec.q {
            for &x in &spec.mass_multiplier {
                grid.push((m, q, x, cell_config(base, m, q, x)?));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::io(Path::new("thread pool"), std::io::Error::other(e)))?;
    let results: Vec<(SweepCell, Option<RunOutput>)> = pool.install(|| {
        grid.par_iter()
            .map(|(m, q, x, cfg)| classify(*m, *q, *x, execute(cfg)))
            .collect()
    });

    let table = SweepTable {
        schema_version: SCHEMA_VERSION,
        name: base.name.clone(),
        cells: results.iter().map(|(c, _)| c.clone()).collect(),
    };
    if let Some(root) = out_root {
        let dir = root.join(&base.name);
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        for ((_, _, _, cfg), (_, out)) in grid.iter().zip(&results) {
            if let Some(out) = out {
                out.persist(&dir.join("cells").join(&cfg.name))?;
            }
        }
        table.write_csv(&dir.join("sweep.csv"))?;
        let path = dir.join("sweep.json");
        let json = serde_json::to_string_pretty(&table).expect("tables serialize");
        fs::write(&path, json).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(table)
}
