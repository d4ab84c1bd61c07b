//! Budgeted hyperparameter search scored by validation MCC.
//!
//! Continuous families use seeded random search over log-uniform ranges; the
//! CNN walks its 24-point architecture grid in a seeded order.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{cnn, train_feature_model, CnnArchitecture, Family, HyperParams, Kernel, TrainOptions};
use crate::error::{Error, Result};
use crate::eval::{metrics, ConfusionCounts};
use crate::rng::{mix, rng_from_seed, PipelineRng};

pub const LDA_RANGE: (f64, f64) = (1e-6, 1.0);
pub const SVM_RANGE: (f64, f64) = (1e-3, 1e3);
pub const BOOST_N_LEARN: (usize, usize) = (10, 500);
pub const BOOST_RATE: (f64, f64) = (1e-3, 1.0);
pub const DEFAULT_BUDGET: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub budget: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub options: TrainOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: DEFAULT_BUDGET,
            seed: 0,
            val_fraction: 0.25,
            options: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SearchData<'a> {
    Features { x: &'a [Vec<f64>], y: &'a [bool] },
    Images { x: &'a [Vec<f32>], y: &'a [bool] },
}

impl SearchData<'_> {
    fn labels(&self) -> &[bool] {
        match self {
            SearchData::Features { y, .. } | SearchData::Images { y, .. } => y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub params: HyperParams,
    pub mcc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: HyperParams,
    pub best_mcc: f64,
    pub trials: Vec<Trial>,
}

fn log_uniform(rng: &mut PipelineRng, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

/// Whether `params` lies inside the searched region of its family.
pub fn in_search_space(params: &HyperParams) -> bool {
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    match params {
        HyperParams::Logistic { .. } => true,
        HyperParams::Lda { delta, gamma } => within(*delta, LDA_RANGE) && within(*gamma, LDA_RANGE),
        HyperParams::Svm {
            box_constraint,
            kernel_scale,
            ..
        } => within(*box_constraint, SVM_RANGE) && within(*kernel_scale, SVM_RANGE),
        HyperParams::Boost { n_learn, learn_rate } => {
            (BOOST_N_LEARN.0..=BOOST_N_LEARN.1).contains(n_learn) && within(*learn_rate, BOOST_RATE)
        }
        HyperParams::Cnn { arch } => CnnArchitecture::search_grid().contains(arch),
    }
}

/// Candidates in evaluation order. The logistic baseline is not tuned and
/// has a single candidate.
pub fn candidates(family: Family, budget: usize, seed: u64) -> Vec<HyperParams> {
    let mut rng = rng_from_seed(mix(&[seed, u64::from(family.tag())]));
    match family {
        Family::Logistic => vec![HyperParams::default_for(Family::Logistic)],
        Family::Cnn => {
            let mut grid = CnnArchitecture::search_grid();
            grid.shuffle(&mut rng);
            grid.into_iter().take(budget).map(|arch| HyperParams::Cnn { arch }).collect()
        }
        _ => (0..budget)
            .map(|_| match family {
                Family::Lda => HyperParams::Lda {
                    delta: log_uniform(&mut rng, LDA_RANGE),
                    gamma: log_uniform(&mut rng, LDA_RANGE),
                },
                Family::SvmLinear | Family::SvmRbf => HyperParams::Svm {
                    box_constraint: log_uniform(&mut rng, SVM_RANGE),
                    kernel_scale: log_uniform(&mut rng, SVM_RANGE),
                    kernel: if family == Family::SvmLinear { Kernel::Linear } else { Kernel::Rbf },
                },
                _ => HyperParams::Boost {
                    n_learn: rng.gen_range(BOOST_N_LEARN.0..=BOOST_N_LEARN.1),
                    learn_rate: log_uniform(&mut rng, BOOST_RATE),
                },
            })
            .collect(),
    }
}

/// Per-class shuffled split; returns sorted (train, validation) indices.
pub fn stratified_split(y: &[bool], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut k = (idx.len() as f64 * val_fraction).round() as usize;
        if k == 0 && idx.len() >= 2 {
            k = 1;
        }
        k = k.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn evaluate(params: &HyperParams, data: SearchData<'_>, train: &[usize], val: &[usize], cfg: &SearchConfig, trial: usize) -> Result<f64> {
    let y = data.labels();
    let truth: Vec<bool> = val.iter().map(|&i| y[i]).collect();
    let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let predicted: Vec<bool> = match (params, data) {
        (HyperParams::Cnn { arch }, SearchData::Images { x, .. }) => {
            let xtr: Vec<Vec<f32>> = train.iter().map(|&i| x[i].clone()).collect();
            let mut tc = cfg.options.cnn.clone();
            tc.seed = mix(&[cfg.seed, 0xC4, trial as u64]);
            let (w, _) = cnn::train_cnn(*arch, &xtr, &ytr, &tc)?;
            let xv: Vec<&[f32]> = val.iter().map(|&i| x[i].as_slice()).collect();
            w.forward(&xv)?.iter().map(|p| p[1] > p[0]).collect()
        }
        (HyperParams::Cnn { .. }, _) => {
            return Err(Error::Argument("CNN search needs spectrogram images".into()));
        }
        (_, SearchData::Features { x, .. }) => {
            let xtr: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let m = train_feature_model(params, &xtr, &ytr, &cfg.options)?;
            val.iter().map(|&i| m.predict(&x[i])).collect()
        }
        (_, SearchData::Images { .. }) => {
            return Err(Error::Argument("feature-based search needs feature rows".into()));
        }
    };
    Ok(metrics(&ConfusionCounts::from_predictions(&truth, &predicted)?)?.mcc)
}

/// Splits the training data 75/25 (stratified), trains every candidate on the
/// larger part and returns the one with the highest validation MCC (earliest
/// on ties).
pub fn hyper_search(family: Family, data: SearchData<'_>, cfg: &SearchConfig) -> Result<SearchOutcome> {
    if cfg.budget == 0 {
        return Err(Error::Argument("search budget must be at least 1".into()));
    }
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "validation fraction must lie in (0, 1), got {}",
            cfg.val_fraction
        )));
    }
    let (train, val) = stratified_split(data.labels(), cfg.val_fraction, mix(&[cfg.seed, 0x5B]));
    if val.is_empty() {
        return Err(Error::DegenerateData("too few samples for a validation split".into()));
    }
    let mut trials = Vec::new();
    let mut best: Option<(f64, HyperParams)> = None;
    for (i, params) in candidates(family, cfg.budget, cfg.seed).into_iter().enumerate() {
        match evaluate(&params, data, &train, &val, cfg, i) {
            Ok(mcc) => {
                log::debug!("{family} trial {i}: {params:?} -> validation MCC {mcc:.4}");
                if best.as_ref().is_none_or(|b| mcc > b.0) {
                    best = Some((mcc, params.clone()));
                }
                trials.push(Trial {
                    params,
                    mcc: Some(mcc),
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("{family} trial {i} failed: {e}");
                trials.push(Trial {
                    params,
                    mcc: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    match best {
        Some((best_mcc, best)) => Ok(SearchOutcome { best, best_mcc, trials }),
        None => Err(Error::Search(format!(
            "all {} {family} candidates failed: {}",
            trials.len(),
            trials.iter().filter_map(|t| t.error.as_deref()).collect::<Vec<_>>().join("; ")
        ))),
    }
}
