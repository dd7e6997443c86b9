//! Summaries and CSV/JSON exports over persisted run records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;
use crate::record::{CheckStatus, RunRecord, RECORD_FILE, SCHEMA_VERSION};

pub const CHECK_COLUMNS: [&str; 4] = ["record", "check", "status", "detail"];
pub const EXPONENT_COLUMNS: [&str; 7] = [
    "record",
    "p0",
    "alpha_lower",
    "beta_lower",
    "q_aux",
    "alpha_hat",
    "alpha_hat_stderr",
];

fn find_records(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let candidate = path.join(RECORD_FILE);
    if candidate.is_file() {
        out.push(candidate);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| HarnessError::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    for dir in entries {
        find_records(&dir, out)?;
    }
    Ok(())
}

/// Loads every `record.json` under `paths`, sorted by path. All files with
/// a foreign schema version are named in one error.
pub fn collect_records(paths: &[PathBuf]) -> Result<Vec<(PathBuf, RunRecord)>, HarnessError> {
    let mut files = Vec::new();
    for p in paths {
        find_records(p, &mut files)?;
    }
    if files.is_empty() {
        return Err(HarnessError::NoRecords(paths.first().cloned().unwrap_or_default()));
    }
    let mut values = Vec::with_capacity(files.len());
    let mut mismatched = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| HarnessError::io(&f, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::json(&f, e))?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(SCHEMA_VERSION as u64) {
            mismatched.push((f, version));
        } else {
            values.push((f, value));
        }
    }
    if !mismatched.is_empty() {
        return Err(HarnessError::SchemaMismatch {
            expected: SCHEMA_VERSION,
            files: mismatched,
        });
    }
    values
        .into_iter()
        .map(|(f, v)| {
            serde_json::from_value(v)
                .map(|r| (f.clone(), r))
                .map_err(|e| HarnessError::json(&f, e))
        })
        .collect()
}

fn record_name(record: &RunRecord) -> String {
    toml::from_str::<toml::Table>(&record.config)
        .ok()
        .and_then(|t| t.get("name").and_then(|n| n.as_str()).map(str::to_string))
        .unwrap_or_else(|| "unnamed".into())
}

/// Plain-text summary: termination, exponents and every check per record.
pub fn summarize(records: &[(PathBuf, RunRecord)]) -> String {
    let mut s = String::new();
    let mut failures = 0;
    for (path, r) in records {
        let _ = writeln!(s, "== {} ({})", record_name(r), path.display());
        if let Some(t) = r.termination {
            let _ = writeln!(
                s,
                "   termination: {}",
                serde_json::to_value(t).unwrap().as_str().unwrap_or_default()
            );
        }
        if let Some(b) = &r.blowup {
            let _ = writeln!(s, "   blow-up at t ≈ {:.6e} ({:?})", b.t_est, b.trigger);
        }
        if let Some(e) = &r.exponents {
            let alpha = e
                .alpha_lower
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "none".into());
            let _ = writeln!(
                s,
                "   exponents: p0 = {:.4}, alpha_lower = {alpha}, beta_lower = {:.4}",
                e.p0, e.beta_lower
            );
        }
        for p in &r.reports.profiles {
            if let Some(f) = &p.fit {
                let _ = writeln!(s, "   fitted alpha_hat = {:.4} ± {:.2e}", f.alpha_hat, f.stderr);
                break;
            }
        }
        for c in &r.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => {
                    failures += 1;
                    "FAIL"
                }
                CheckStatus::Info => "info",
            };
            let _ = writeln!(s, "   [{tag}] {}: {}", c.name, c.detail);
        }
    }
    let _ = writeln!(s, "{} records, {failures} failed checks", records.len());
    s
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    schema_version: u32,
    records: Vec<SummaryEntry<'a>>,
}

#[derive(Serialize)]
struct SummaryEntry<'a> {
    name: String,
    path: String,
    passed: bool,
    record: &'a RunRecord,
}

/// Writes `summary.txt`, `summary.json`, `checks.csv` and `exponents.csv`.
pub fn write_report(records: &[(PathBuf, RunRecord)], out_dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let txt = out_dir.join("summary.txt");
    fs::write(&txt, summarize(records)).map_err(|e| HarnessError::io(&txt, e))?;

    let summary = SummaryJson {
        schema_version: SCHEMA_VERSION,
        records: records
            .iter()
            .map(|(p, r)| SummaryEntry {
                name: record_name(r),
                path: p.display().to_string(),
                passed: r.passed(),
                record: r,
            })
            .collect(),
    };
    let json = out_dir.join("summary.json");
    fs::write(
        &json,
        serde_json::to_string_pretty(&summary).expect("summaries serialize"),
    )
    .map_err(|e| HarnessError::io(&json, e))?;

    let path = out_dir.join("checks.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
    w.write_record(CHECK_COLUMNS).map_err(|e| HarnessError::csv(&path, e))?;
    for (_, r) in records {
        let name = record_name(r);
        for c in &r.checks {
            let status = serde_json::to_value(c.status).expect("status serializes");
            w.write_record([
                name.as_str(),
                c.name.as_str(),
                status.as_str().unwrap_or_default(),
                c.detail.as_str(),
            ])
            .map_err(|e| HarnessError::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;

    let path = out_dir.join("exponents.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
    w.write_record(EXPONENT_COLUMNS)
        .map_err(|e| HarnessError::csv(&path, e))?;
    let num = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    for (_, r) in records {
        let Some(e) = &r.exponents else { continue };
        let fit = r.reports.profiles.iter().find_map(|p| p.fit);
        w.write_record([
            record_name(r),
            format!("{}", e.p0),
            num(e.alpha_lower),
            format!("{}", e.beta_lower),
            format!("{}", e.q_aux),
            num(fit.map(|f| f.alpha_hat)),
            num(fit.map(|f| f.stderr)),
        ])
        .map_err(|e| HarnessError::csv(&path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))
}
