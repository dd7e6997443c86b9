use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ks_harness::config::parse_config;
use ks_harness::presets::preset;
use ks_harness::report::{collect_records, summarize, write_report};
use ks_harness::{run_scenario, sweep, CellVerdict, HarnessError, RunRecord, ScenarioConfig};

/// Radial Keller–Segel scenarios, estimate checks and sweeps.
///
/// Exit status: 0 when every check passes, 1 when any check fails, 2 on
/// configuration or runtime errors.
#[derive(Parser)]
#[command(name = "ks-harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output root; each run writes `<out>/<name>/record.json`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the number of refinement levels.
    #[arg(long, global = true)]
    refine: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run the parameter grid of a scenario file.
    Sweep { config: PathBuf },
    /// Run a built-in preset or preset group.
    Verify { preset: String },
    /// Summarize records found under the given directories.
    Report { dirs: Vec<PathBuf> },
}

fn load(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

impl Cli {
    fn apply(&self, mut cfg: ScenarioConfig) -> Result<ScenarioConfig, HarnessError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(r) = self.refine {
            cfg.grid.refine = r;
        }
        let issues = cfg.validate();
        if !issues.is_empty() {
            return Err(ks_harness::ConfigError { issues }.into());
        }
        Ok(cfg)
    }

    fn run_all(&self, configs: Vec<ScenarioConfig>) -> Result<bool, HarnessError> {
        let mut ok = true;
        for cfg in configs {
            let cfg = self.apply(cfg)?;
            if cfg.sweep.is_some() {
                ok &= self.run_sweep(&cfg)?;
                continue;
            }
            let record = run_scenario(&cfg, &self.out)?;
            print_record(&cfg.name, &record);
            ok &= record.passed();
        }
        Ok(ok)
    }

    fn run_sweep(&self, cfg: &ScenarioConfig) -> Result<bool, HarnessError> {
        let table = sweep(cfg, self.threads, Some(&self.out))?;
        for c in &table.cells {
            println!(
                "m={} q={} mass×{}: {:?}{}",
                c.m,
                c.q,
                c.mass_multiplier,
                c.verdict,
                c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            );
        }
        Ok(table.cells.iter().all(|c| c.verdict != CellVerdict::Inconclusive))
    }

    fn dispatch(&self) -> Result<bool, HarnessError> {
        if let Some(k) = self.threads {
            // the default pool only accepts its size once; later calls are no-ops
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
        match &self.command {
            Command::Run { config } => self.run_all(vec![load(config)?]),
            Command::Verify { preset: name } => self.run_all(preset(name)?),
            Command::Sweep { config } => {
                let cfg = self.apply(load(config)?)?;
                self.run_sweep(&cfg)
            }
            Command::Report { dirs } => {
                let dirs = if dirs.is_empty() {
                    vec![self.out.clone()]
                } else {
                    dirs.clone()
                };
                let records = collect_records(&dirs)?;
                print!("{}", summarize(&records));
                write_report(&records, &self.out.join("report"))?;
                Ok(records.iter().all(|(_, r)| r.passed()))
            }
        }
    }
}

fn print_record(name: &str, record: &RunRecord) {
    println!("{name}: {}", if record.passed() { "pass" } else { "FAIL" });
    for c in &record.checks {
        println!("  {:?} {}: {}", c.status, c.name, c.detail);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.dispatch() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
