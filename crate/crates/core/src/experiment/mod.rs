//! Config-driven orchestration: prepare event lists and features, run the
//! seeded trainings, audit the results.
//!
//! Output tree under `output_dir`:
//!
//! ```text
//! effective_config.toml
//! prepare/summary.json, placement_warnings.csv
//! prepare/events/<mode>_<split>.csv
//! prepare/features/<mode>_<split>.csv
//! prepare/spectrograms/<mode>_<split>.bin      (only when the CNN is enabled)
//! runs/<mode>/<family>/run_<k>/{search.json, model.bin, model.bin.txt, predictions.csv, metrics.json}
//! runs/failures.json
//! audit/{bias_report.json, results_<mode>.csv, gaps.csv, probe.json, summary.txt}
//! audit/histograms/<mode>_<family>.csv
//! ```

mod audit;
mod config;
mod prepare;
mod run;

use std::path::{Path, PathBuf};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::eventgen::EventMode;
use crate::io_util::write_atomic;
use crate::models::Family;
use crate::rng::mix;

pub use audit::{cmd_audit, padding_probe, AuditOutcome, ProbeResult, PROBE_L2};
pub use config::{AuditSettings, DataConfig, EventgenSettings, ExperimentConfig, RunSettings, TrainingSettings};
pub use prepare::{cmd_prepare, ModeCounts, PrepareSummary};
pub use run::{cmd_run, run_seed, PredictionRow, RunFile, RunSummary, TaskFailure, TaskId};

/// Paths of every artifact below the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

fn stem(mode: EventMode, split: Split) -> String {
    format!("{}_{}", mode.as_str().to_ascii_lowercase(), split.as_str())
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn effective_config(&self) -> PathBuf {
        self.root.join("effective_config.toml")
    }

    pub fn prepare_summary(&self) -> PathBuf {
        self.root.join("prepare/summary.json")
    }

    pub fn placement_warnings(&self) -> PathBuf {
        self.root.join("prepare/placement_warnings.csv")
    }

    pub fn events(&self, mode: EventMode, split: Split) -> PathBuf {
        self.root.join("prepare/events").join(format!("{}.csv", stem(mode, split)))
    }

    pub fn features(&self, mode: EventMode, split: Split) -> PathBuf {
        self.root.join("prepare/features").join(format!("{}.csv", stem(mode, split)))
    }

    pub fn spectrograms(&self, mode: EventMode, split: Split) -> PathBuf {
        self.root.join("prepare/spectrograms").join(format!("{}.bin", stem(mode, split)))
    }

    pub fn run_dir(&self, mode: EventMode, family: Family, run: usize) -> PathBuf {
        self.root
            .join("runs")
            .join(mode.as_str().to_ascii_lowercase())
            .join(family.as_str())
            .join(format!("run_{run:02}"))
    }

    pub fn failures(&self) -> PathBuf {
        self.root.join("runs/failures.json")
    }

    pub fn audit_dir(&self) -> PathBuf {
        self.root.join("audit")
    }
}

impl ExperimentConfig {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.experiment.output_dir)
    }

    fn write_effective(&self) -> Result<()> {
        write_atomic(&self.layout().effective_config(), self.to_toml().as_bytes())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.experiment.jobs)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufReader::new(f))
}

fn require(paths: Vec<PathBuf>) -> Result<()> {
    let missing: Vec<PathBuf> = paths.into_iter().filter(|p| !p.is_file()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingFiles(missing))
    }
}

/// Search seed for one run, distinct from the training seed.
fn search_seed(seed: u64) -> u64 {
    mix(&[seed, 0x5EA4C4])
}

/// Prepare, run and audit in sequence. Stops before the audit when a run
/// failed.
pub fn cmd_all(cfg: &ExperimentConfig) -> Result<(PrepareSummary, RunSummary, Option<AuditOutcome>)> {
    let prepared = cmd_prepare(cfg)?;
    let runs = cmd_run(cfg)?;
    let audit = if runs.failed.is_empty() { Some(cmd_audit(cfg)?) } else { None };
    Ok((prepared, runs, audit))
}
