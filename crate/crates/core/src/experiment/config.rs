use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventgen::{BurrParams, EventMode, GenerationConfig};
use crate::models::{Family, TrainConfig, TrainOptions};

/// Whole experiment, read from a TOML file of `key = value` lines under
/// `[data]`, `[experiment]`, `[eventgen]`, `[training]` and `[audit]`.
/// Every key is optional; the defaults below apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub experiment: RunSettings,
    pub eventgen: EventgenSettings,
    pub training: TrainingSettings,
    pub audit: AuditSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory of `<id>.wav` recordings with `<id>.txt` annotations. Default `data`.
    pub data_dir: PathBuf,
    /// Two columns per line: recording id, `train` or `test`. Default `data/split.txt`.
    pub split_manifest: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            data_dir: PathBuf::from("data"),
            split_manifest: PathBuf::from("data/split.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    /// Default `out`.
    pub output_dir: PathBuf,
    /// Default both, `["FD", "VD"]`.
    pub modes: Vec<EventMode>,
    /// Default all six families.
    pub families: Vec<Family>,
    /// Default 42.
    pub base_seed: u64,
    /// Seeded repetitions per family and mode. Default 10.
    pub n_runs: usize,
    /// Candidates evaluated per hyperparameter search. Default 30.
    pub search_budget: usize,
    /// Worker threads; 0 uses every core. Default 0.
    pub jobs: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            output_dir: PathBuf::from("out"),
            modes: EventMode::ALL.to_vec(),
            families: Family::ALL.to_vec(),
            base_seed: 42,
            n_runs: 10,
            search_budget: crate::models::search::DEFAULT_BUDGET,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventgenSettings {
    /// FD event length in seconds. Default 0.150.
    pub fd_duration: f64,
    /// VD truncation bounds in seconds. Defaults 0.100 and 2.0.
    pub vd_min: f64,
    pub vd_max: f64,
    /// At most one generated event starts per window of this many seconds. Default 5.0.
    pub spacing_window: f64,
    /// Burr XII fit of annotated wheeze durations. Defaults 0.2266, 4.1906, 0.3029.
    pub burr_alpha: f64,
    pub burr_c: f64,
    pub burr_k: f64,
}

impl Default for EventgenSettings {
    fn default() -> Self {
        let g = GenerationConfig::new(EventMode::Fd, 0);
        EventgenSettings {
            fd_duration: g.fd_duration,
            vd_min: g.vd_min,
            vd_max: g.vd_max,
            spacing_window: g.spacing_window,
            burr_alpha: g.burr.alpha,
            burr_c: g.burr.c,
            burr_k: g.burr.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSettings {
    /// Held-out share for hyperparameter search. Default 0.25.
    pub search_val_fraction: f64,
    /// Depth of the boosted trees; 1 gives stumps. Default 1.
    pub boost_depth: usize,
    /// SMO iteration cap; 0 picks max(200000, 500 n). Default 0.
    pub svm_max_iterations: usize,
    /// Defaults 15 epochs, batch 128, Adam rate 0.001, 10% held out.
    pub cnn_max_epochs: usize,
    pub cnn_batch_size: usize,
    pub cnn_learning_rate: f64,
    pub cnn_val_fraction: f64,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let cnn = TrainConfig::default();
        TrainingSettings {
            search_val_fraction: 0.25,
            boost_depth: 1,
            svm_max_iterations: 0,
            cnn_max_epochs: cnn.max_epochs,
            cnn_batch_size: cnn.batch_size,
            cnn_learning_rate: cnn.learning_rate,
            cnn_val_fraction: cnn.val_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSettings {
    /// Family-wise significance level before Bonferroni. Default 0.01.
    pub alpha: f64,
    /// FN histogram bin width in seconds. Default 0.05.
    pub hist_bin_width: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            alpha: 0.01,
            hist_bin_width: 0.05,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn check_unique<T: Ord + std::fmt::Debug>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Argument(format!("at least one {what} is required")));
    }
    let set: BTreeSet<&T> = items.iter().collect();
    if set.len() != items.len() {
        return Err(Error::Argument(format!("{what} listed twice in {items:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.data.data_dir,
            &mut self.data.split_manifest,
            &mut self.experiment.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        check_unique(&e.modes, "mode")?;
        check_unique(&e.families, "model family")?;
        if e.n_runs == 0 {
            return Err(Error::Argument("n_runs must be at least 1".into()));
        }
        if e.search_budget == 0 {
            return Err(Error::Argument("search_budget must be at least 1".into()));
        }
        for mode in EventMode::ALL {
            self.generation(mode).validate()?;
        }
        let t = &self.training;
        if !(t.search_val_fraction > 0.0 && t.search_val_fraction < 1.0) {
            return Err(Error::Argument("search_val_fraction must lie in (0, 1)".into()));
        }
        if t.boost_depth == 0 {
            return Err(Error::Argument("boost_depth must be at least 1".into()));
        }
        self.train_options(0).cnn.validate()?;
        let a = &self.audit;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(Error::Argument("alpha must lie in (0, 1)".into()));
        }
        if !(a.hist_bin_width > 0.0) {
            return Err(Error::Argument("hist_bin_width must be positive".into()));
        }
        Ok(())
    }

    pub fn generation(&self, mode: EventMode) -> GenerationConfig {
        let g = &self.eventgen;
        GenerationConfig {
            mode,
            fd_duration: g.fd_duration,
            vd_min: g.vd_min,
            vd_max: g.vd_max,
            spacing_window: g.spacing_window,
            base_seed: self.experiment.base_seed,
            burr: BurrParams {
                alpha: g.burr_alpha,
                c: g.burr_c,
                k: g.burr_k,
            },
        }
    }

    pub fn train_options(&self, seed: u64) -> TrainOptions {
        let t = &self.training;
        TrainOptions {
            boost_depth: t.boost_depth,
            svm_max_iterations: t.svm_max_iterations,
            cnn: TrainConfig {
                max_epochs: t.cnn_max_epochs,
                batch_size: t.cnn_batch_size,
                learning_rate: t.cnn_learning_rate,
                val_fraction: t.cnn_val_fraction,
                seed,
                ..TrainConfig::default()
            },
        }
    }

    /// Every resolved value, in the input format.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.experiment.n_runs, 10);
        assert_eq!(cfg.experiment.families.len(), 6);
        assert_eq!(cfg.generation(EventMode::Fd).fd_duration, 0.150);
    }

    #[test]
    fn sections_override_defaults() {
        let text = "[experiment]\nmodes = [\"VD\"]\nfamilies = [\"boost\", \"logistic\"]\nn_runs = 3\n\n[audit]\nalpha = 0.05\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.experiment.modes, [EventMode::Vd]);
        assert_eq!(cfg.experiment.families, [Family::Boost, Family::Logistic]);
        assert_eq!(cfg.audit.alpha, 0.05);
        assert_eq!(cfg.experiment.search_budget, 30);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = ExperimentConfig::from_toml_str("[experiment]\nn_runs = 2\nnruns = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("[experiment]\nn_runs = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nmodes = [\"FD\", \"FD\"]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[eventgen]\nfd_duration = 3.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nfamilies = []\n").is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.base_seed = 9;
        cfg.resolve_paths(Path::new("/tmp/x"));
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.data.data_dir, PathBuf::from("/tmp/x/data"));
    }
}
