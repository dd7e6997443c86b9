//! Scenario configs, presets, run records, sweeps and reports for the
//! radial Keller–Segel solvers in `ks-radial`.

pub mod config;
pub mod error;
pub mod presets;
pub mod record;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{parse_config, ConfigError, ConfigIssue, ScenarioConfig, ScenarioKind};
pub use error::HarnessError;
pub use record::{CheckOutcome, CheckStatus, RunOutput, RunRecord, SCHEMA_VERSION};
pub use run::{execute, run_scenario};
pub use sweep::{sweep, CellVerdict, SweepTable};
