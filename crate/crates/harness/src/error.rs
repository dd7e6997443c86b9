use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("unknown preset `{0}`; try one of: {1}")]
    UnknownPreset(String, String),

    #[error("solver error: {0}")]
    Solver(#[from] ks_radial::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("schema version mismatch (expected {expected}) in: {}", list_files(files))]
    SchemaMismatch {
        expected: u32,
        files: Vec<(PathBuf, Option<u64>)>,
    },

    #[error("no run records found under {}", .0.display())]
    NoRecords(PathBuf),
}

fn list_files(files: &[(PathBuf, Option<u64>)]) -> String {
    files
        .iter()
        .map(|(p, v)| match v {
            Some(v) => format!("{} (version {v})", p.display()),
            None => format!("{} (no version)", p.display()),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        HarnessError::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}
