//! Std companion to `rfid-harvest-core`: the TOML scenario document, CSV
//! readers and writers, and the sweep drivers behind the `rfid-harvest` CLI.

pub mod config;
pub mod experiments;
pub mod tables;

use std::io;
use std::path::{Path, PathBuf};

use rfid_harvest_core::harvester::HarvestError;
use rfid_harvest_core::{LinkError, SimError};

pub use config::ConfigDocument;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: empty trace", path.display())]
    EmptyTrace { path: PathBuf },
    #[error("{}:{line}: {reason}", path.display())]
    Input {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
