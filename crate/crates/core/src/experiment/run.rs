use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{open, read_json, require, search_seed, write_json, ExperimentConfig, Layout};
use crate::corpus::{EventClass, Split};
use crate::dsp::read_spectrogram;
use crate::error::{Error, Result};
use crate::eval::{metrics, ConfusionCounts, MetricsReport, RunRecord};
use crate::eventgen::{read_event_csv, EventMode, EventRecord};
use crate::features::read_feature_csv;
use crate::io_util::write_atomic;
use crate::models::persist::save_model;
use crate::models::search::{hyper_search, SearchConfig, SearchData, SearchOutcome};
use crate::models::{cnn_input, train_cnn, train_feature_model, CnnWeights, Family, HyperParams, TrainedModel};
use crate::rng::mix;

const CNN_EVAL_BATCH: usize = 64;

/// `mix(base_seed, family tag, run index, mode tag)`.
pub fn run_seed(base_seed: u64, family: Family, run: usize, mode: EventMode) -> u64 {
    mix(&[base_seed, u64::from(family.tag()), run as u64, mode.tag()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub mode: EventMode,
    pub family: Family,
    pub run: usize,
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} run {}", self.mode, self.family.as_str(), self.run)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task: TaskId,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub completed: Vec<TaskId>,
    pub skipped: Vec<TaskId>,
    pub failed: Vec<TaskFailure>,
}

/// Contents of `metrics.json`; written last, so its presence marks a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    #[serde(flatten)]
    pub record: RunRecord,
    pub params: HyperParams,
    pub converged: bool,
    pub validation_mcc: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub recording_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub class: EventClass,
    pub score: f64,
    pub predicted: EventClass,
}

#[derive(Debug, Serialize)]
struct SearchFile<'a> {
    seed: u64,
    best: &'a HyperParams,
    best_mcc: f64,
    trials: Vec<TrialRow<'a>>,
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    params: &'a HyperParams,
    mcc: Option<f64>,
    error: Option<&'a str>,
}

struct ModeData {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<bool>,
    test_x: Vec<Vec<f64>>,
    test_y: Vec<bool>,
    test_events: Vec<EventRecord>,
    train_img: Vec<Vec<f32>>,
    test_img: Vec<Vec<f32>>,
}

fn load_images(path: &std::path::Path, expected: usize) -> Result<Vec<Vec<f32>>> {
    let mut input = open(path)?;
    let mut out = Vec::with_capacity(expected);
    while let Some(spec) = read_spectrogram(&mut input)? {
        out.push(cnn_input(&spec));
    }
    if out.len() != expected {
        return Err(Error::Format(format!(
            "{} holds {} spectrograms for {expected} events",
            path.display(),
            out.len()
        )));
    }
    Ok(out)
}

type SplitData = (Vec<Vec<f64>>, Vec<bool>, Vec<EventRecord>);

fn load_mode(layout: &Layout, mode: EventMode, images: bool) -> Result<ModeData> {
    let split = |split: Split| -> Result<SplitData> {
        let rows = read_feature_csv(open(&layout.features(mode, split))?)?;
        let events = read_event_csv(open(&layout.events(mode, split))?)?;
        if rows.len() != events.len() {
            return Err(Error::Format(format!(
                "{mode} {} features and events disagree in length",
                split.as_str()
            )));
        }
        let y = rows.iter().map(|r| r.label.is_positive()).collect();
        Ok((rows.into_iter().map(|r| r.values).collect(), y, events))
    };
    let (train_x, train_y, _) = split(Split::Train)?;
    let (test_x, test_y, test_events) = split(Split::Test)?;
    let (train_img, test_img) = if images {
        (
            load_images(&layout.spectrograms(mode, Split::Train), train_x.len())?,
            load_images(&layout.spectrograms(mode, Split::Test), test_x.len())?,
        )
    } else {
        (Vec::new(), Vec::new())
    };
    if test_x.is_empty() {
        return Err(Error::EmptyInput(format!("{mode} test split has no events")));
    }
    Ok(ModeData {
        train_x,
        train_y,
        test_x,
        test_y,
        test_events,
        train_img,
        test_img,
    })
}

fn is_complete(layout: &Layout, task: TaskId) -> bool {
    let path = layout.run_dir(task.mode, task.family, task.run).join("metrics.json");
    match read_json::<RunFile>(&path) {
        Ok(f) => f.record.family == task.family && f.record.mode == task.mode && f.record.run == task.run,
        Err(_) => false,
    }
}

fn cnn_scores(w: &CnnWeights<f32>, images: &[Vec<f32>]) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(images.len());
    for chunk in images.chunks(CNN_EVAL_BATCH) {
        let batch: Vec<&[f32]> = chunk.iter().map(|v| v.as_slice()).collect();
        scores.extend(w.forward(&batch)?.into_iter().map(|p| f64::from(p[1]) - 0.5));
    }
    Ok(scores)
}

fn execute(cfg: &ExperimentConfig, layout: &Layout, data: &ModeData, task: TaskId) -> Result<()> {
    let seed = run_seed(cfg.experiment.base_seed, task.family, task.run, task.mode);
    let options = cfg.train_options(seed);
    let search_cfg = SearchConfig {
        budget: cfg.experiment.search_budget,
        seed: search_seed(seed),
        val_fraction: cfg.training.search_val_fraction,
        options: options.clone(),
    };
    let search_data = if task.family == Family::Cnn {
        SearchData::Images {
            x: &data.train_img,
            y: &data.train_y,
        }
    } else {
        SearchData::Features {
            x: &data.train_x,
            y: &data.train_y,
        }
    };
    let outcome: SearchOutcome = hyper_search(task.family, search_data, &search_cfg)?;
    log::info!("{task}: search picked {:?} (validation MCC {:.3})", outcome.best, outcome.best_mcc);

    let (model, scores, converged) = match &outcome.best {
        HyperParams::Cnn { arch } => {
            let (w, report) = train_cnn(*arch, &data.train_img, &data.train_y, &options.cnn)?;
            log::info!("{task}: CNN kept epoch {} of {}", report.best_epoch + 1, report.val_loss.len());
            let scores = cnn_scores(&w, &data.test_img)?;
            (TrainedModel::Cnn(w), scores, true)
        }
        params => {
            let m = train_feature_model(params, &data.train_x, &data.train_y, &options)?;
            let scores = data.test_x.iter().map(|r| m.decision(r)).collect();
            let converged = m.converged;
            (TrainedModel::Feature(m), scores, converged)
        }
    };
    let predicted: Vec<bool> = scores.iter().map(|&s| s > 0.0).collect();
    let counts = ConfusionCounts::from_predictions(&data.test_y, &predicted)?;
    let report: MetricsReport = metrics(&counts)?;

    let dir = layout.run_dir(task.mode, task.family, task.run);
    let search_file = SearchFile {
        seed: search_cfg.seed,
        best: &outcome.best,
        best_mcc: outcome.best_mcc,
        trials: outcome
            .trials
            .iter()
            .map(|t| TrialRow {
                params: &t.params,
                mcc: t.mcc,
                error: t.error.as_deref(),
            })
            .collect(),
    };
    write_json(&dir.join("search.json"), &search_file)?;
    save_model(&dir.join("model.bin"), &model)?;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for ((ev, &score), &p) in data.test_events.iter().zip(&scores).zip(&predicted) {
            w.serialize(PredictionRow {
                recording_id: ev.recording_id.clone(),
                start_s: ev.start_s,
                end_s: ev.end_s,
                class: ev.class,
                score,
                predicted: if p { EventClass::Wheeze } else { EventClass::Random },
            })?;
        }
        w.flush().map_err(|e| Error::io(&dir, e))?;
    }
    write_atomic(&dir.join("predictions.csv"), &buf)?;

    let file = RunFile {
        record: RunRecord {
            family: task.family,
            mode: task.mode,
            run: task.run,
            seed,
            counts,
            metrics: report,
        },
        params: outcome.best.clone(),
        converged,
        validation_mcc: outcome.best_mcc,
        n_train: data.train_y.len(),
        n_test: data.test_y.len(),
    };
    write_json(&dir.join("metrics.json"), &file)?;
    log::info!("{task}: test MCC {:.3}", file.record.metrics.mcc);
    Ok(())
}

/// Runs every (mode, family, run) that has no `metrics.json` yet. A failing
/// run is recorded in `runs/failures.json` and does not stop the others.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    let e = &cfg.experiment;
    let images = e.families.contains(&Family::Cnn);
    let mut needed = vec![layout.prepare_summary()];
    for &mode in &e.modes {
        for split in [Split::Train, Split::Test] {
            needed.push(layout.events(mode, split));
            needed.push(layout.features(mode, split));
            if images {
                needed.push(layout.spectrograms(mode, split));
            }
        }
    }
    require(needed)?;
    cfg.write_effective()?;

    let mut tasks = Vec::new();
    let mut summary = RunSummary::default();
    for &mode in &e.modes {
        for &family in &e.families {
            for run in 0..e.n_runs {
                let task = TaskId { mode, family, run };
                if is_complete(&layout, task) {
                    summary.skipped.push(task);
                } else {
                    tasks.push(task);
                }
            }
        }
    }
    if !summary.skipped.is_empty() {
        log::info!("{} runs already complete, {} to go", summary.skipped.len(), tasks.len());
    }

    let mut data: BTreeMap<EventMode, Arc<ModeData>> = BTreeMap::new();
    for &mode in &e.modes {
        if tasks.iter().any(|t| t.mode == mode) {
            data.insert(
                mode,
                Arc::new(load_mode(
                    &layout,
                    mode,
                    images && tasks.iter().any(|t| t.mode == mode && t.family == Family::Cnn),
                )?),
            );
        }
    }

    let pool = cfg.pool()?;
    let results: Vec<(TaskId, Result<()>)> =
        pool.install(|| tasks.par_iter().map(|&t| (t, execute(cfg, &layout, &data[&t.mode], t))).collect());
    for (task, result) in results {
        match result {
            Ok(()) => summary.completed.push(task),
            Err(err) => {
                log::error!("{task} failed: {err}");
                summary.failed.push(TaskFailure {
                    task,
                    kind: err.kind().to_string(),
                    message: err.to_string(),
                });
            }
        }
    }
    let failures_path: PathBuf = layout.failures();
    if summary.failed.is_empty() {
        if failures_path.exists() {
            std::fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
        }
    } else {
        write_json(&failures_path, &summary.failed)?;
    }
    Ok(summary)
}
