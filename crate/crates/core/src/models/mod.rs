//! The six classifier families and their shared train/predict contract.
//!
//! Feature-based families standardize the 235 event features with statistics
//! fitted on the training rows, then train on the z-scores. The CNN consumes
//! normalized 257x59 spectrograms.

pub mod boost;
pub mod cnn;
pub mod lda;
pub mod logistic;
pub mod persist;
pub mod search;
pub mod standardize;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use boost::{train_logitboost, BoostModel, BoostParams};
pub use cnn::{cnn_forward, cnn_grad_check, train_cnn, BnMode, CnnArchitecture, CnnWeights, TrainConfig};
pub use lda::{train_lda, LdaModel};
pub use logistic::{train_logistic, LogisticModel};
pub use search::{hyper_search, SearchConfig, SearchData, SearchOutcome, Trial};
pub use standardize::Standardizer;
pub use svm::{train_svm, Kernel, SvmModel, SvmParams};

/// Real-valued score; positive means wheeze.
pub trait ScoreModel {
    fn decision(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }
}

pub(crate) fn check_binary(x: &[Vec<f64>], y: &[bool]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Argument(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Argument("rows must share a non-zero length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Argument("training rows contain non-finite values".into()));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::DegenerateData("training labels contain a single class".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    Lda,
    SvmLinear,
    SvmRbf,
    Boost,
    Cnn,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Logistic,
        Family::Lda,
        Family::SvmLinear,
        Family::SvmRbf,
        Family::Boost,
        Family::Cnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Lda => "lda",
            Family::SvmLinear => "svm_linear",
            Family::SvmRbf => "svm_rbf",
            Family::Boost => "boost",
            Family::Cnn => "cnn",
        }
    }

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Logistic => "Baseline",
            Family::Lda => "LDA",
            Family::SvmLinear => "SVMlin",
            Family::SvmRbf => "SVMrbf",
            Family::Boost => "Boost",
            Family::Cnn => "CNN",
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Family::Logistic => 1,
            Family::Lda => 2,
            Family::SvmLinear => 3,
            Family::SvmRbf => 4,
            Family::Boost => 5,
            Family::Cnn => 6,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.tag() == tag)
    }

    pub fn uses_features(self) -> bool {
        self != Family::Cnn
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == key || f.label().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "baseline" => Some(Family::Logistic),
                "logitboost" => Some(Family::Boost),
                _ => None,
            })
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown model family {s:?} (expected one of logistic, lda, svm_linear, svm_rbf, boost, cnn)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperParams {
    Logistic {
        l2: f64,
    },
    Lda {
        delta: f64,
        gamma: f64,
    },
    Svm {
        box_constraint: f64,
        kernel_scale: f64,
        kernel: Kernel,
    },
    Boost {
        n_learn: usize,
        learn_rate: f64,
    },
    Cnn {
        arch: CnnArchitecture,
    },
}

impl HyperParams {
    pub fn family(&self) -> Family {
        match self {
            HyperParams::Logistic { .. } => Family::Logistic,
            HyperParams::Lda { .. } => Family::Lda,
            HyperParams::Svm {
                kernel: Kernel::Linear, ..
            } => Family::SvmLinear,
            HyperParams::Svm { kernel: Kernel::Rbf, .. } => Family::SvmRbf,
            HyperParams::Boost { .. } => Family::Boost,
            HyperParams::Cnn { .. } => Family::Cnn,
        }
    }

    /// Starting values used when no search is run.
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Logistic => HyperParams::Logistic { l2: 1.0 },
            Family::Lda => HyperParams::Lda { delta: 0.0, gamma: 0.01 },
            Family::SvmLinear => HyperParams::Svm {
                box_constraint: 1.0,
                kernel_scale: 1.0,
                kernel: Kernel::Linear,
            },
            Family::SvmRbf => HyperParams::Svm {
                box_constraint: 1.0,
                kernel_scale: 10.0,
                kernel: Kernel::Rbf,
            },
            Family::Boost => HyperParams::Boost {
                n_learn: 100,
                learn_rate: 0.1,
            },
            Family::Cnn => HyperParams::Cnn {
                arch: CnnArchitecture::fd_best(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Argument(m));
        match *self {
            HyperParams::Logistic { l2 } if !(l2 >= 0.0 && l2.is_finite()) => fail(format!("l2 must be >= 0, got {l2}")),
            HyperParams::Lda { delta, .. } if !(delta >= 0.0) => fail(format!("delta must be >= 0, got {delta}")),
            HyperParams::Lda { gamma, .. } if !(0.0..=1.0).contains(&gamma) => fail(format!("gamma must lie in [0, 1], got {gamma}")),
            HyperParams::Svm {
                box_constraint,
                kernel_scale,
                ..
            } if !(box_constraint > 0.0 && kernel_scale > 0.0) => fail(format!(
                "box constraint and kernel scale must be positive, got {box_constraint} and {kernel_scale}"
            )),
            HyperParams::Boost { n_learn, learn_rate } => BoostParams::new(n_learn, learn_rate).validate(),
            HyperParams::Cnn { arch } => arch.validate(),
            _ => Ok(()),
        }
    }
}

/// Settings that are not searched but shape training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub boost_depth: usize,
    /// 0 selects the solver default.
    pub svm_max_iterations: usize,
    pub cnn: TrainConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            boost_depth: 1,
            svm_max_iterations: 0,
            cnn: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureClassifier {
    Logistic(LogisticModel),
    Lda(LdaModel),
    Svm(SvmModel),
    Boost(BoostModel),
}

impl ScoreModel for FeatureClassifier {
    fn decision(&self, x: &[f64]) -> f64 {
        match self {
            FeatureClassifier::Logistic(m) => m.decision(x),
            FeatureClassifier::Lda(m) => m.decision(x),
            FeatureClassifier::Svm(m) => m.decision(x),
            FeatureClassifier::Boost(m) => m.decision(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub params: HyperParams,
    pub standardizer: Standardizer,
    pub classifier: FeatureClassifier,
    /// False when the solver stopped at its iteration cap.
    pub converged: bool,
}

impl FeatureModel {
    /// Score for a raw (unstandardized) feature row.
    pub fn decision(&self, raw: &[f64]) -> f64 {
        self.classifier.decision(&self.standardizer.transform_row(raw))
    }

    pub fn predict(&self, raw: &[f64]) -> bool {
        self.decision(raw) > 0.0
    }
}

/// Fits the standardizer on `x` and trains the family given by `params`.
/// An SVM that hits its iteration cap keeps its best iterate and is marked
/// as not converged.
pub fn train_feature_model(params: &HyperParams, x: &[Vec<f64>], y: &[bool], opts: &TrainOptions) -> Result<FeatureModel> {
    params.validate()?;
    check_binary(x, y)?;
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.transform(x);
    let mut converged = true;
    let classifier = match params {
        HyperParams::Logistic { l2 } => FeatureClassifier::Logistic(train_logistic(&z, y, *l2)?),
        HyperParams::Lda { delta, gamma } => FeatureClassifier::Lda(train_lda(&z, y, *delta, *gamma)?),
        HyperParams::Svm {
            box_constraint,
            kernel_scale,
            kernel,
        } => {
            let mut p = SvmParams::new(*kernel, *box_constraint, *kernel_scale);
            p.max_iterations = opts.svm_max_iterations;
            match train_svm(&z, y, &p) {
                Ok(m) => FeatureClassifier::Svm(m),
                Err(Error::Convergence {
                    iterations,
                    violation,
                    best,
                }) => {
                    log::warn!("SVM stopped after {iterations} iterations with KKT violation {violation:.2e}; keeping the last iterate");
                    converged = false;
                    FeatureClassifier::Svm(*best)
                }
                Err(e) => return Err(e),
            }
        }
        HyperParams::Boost { n_learn, learn_rate } => {
            let mut p = BoostParams::new(*n_learn, *learn_rate);
            p.max_depth = opts.boost_depth;
            FeatureClassifier::Boost(train_logitboost(&z, y, &p)?)
        }
        HyperParams::Cnn { .. } => {
            return Err(Error::Argument("the CNN trains on spectrograms, not feature rows".into()));
        }
    };
    Ok(FeatureModel {
        params: params.clone(),
        standardizer,
        classifier,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Feature(FeatureModel),
    Cnn(CnnWeights<f32>),
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.params().family()
    }

    pub fn params(&self) -> HyperParams {
        match self {
            TrainedModel::Feature(m) => m.params.clone(),
            TrainedModel::Cnn(w) => HyperParams::Cnn { arch: w.arch },
        }
    }
}

/// Converts a normalized spectrogram to the CNN input layout.
pub fn cnn_input(spec: &crate::dsp::Spectrogram) -> Vec<f32> {
    spec.values().iter().map(|&v| v as f32).collect()
}
