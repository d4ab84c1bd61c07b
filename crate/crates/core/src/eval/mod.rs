//! Classification metrics, significance testing and the duration-bias audit.

mod histogram;
mod report;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use histogram::{fn_duration_histogram, DurationHistogram, HIST_MAX_S, HIST_START_S};
pub use report::{
    bias_report, write_histogram_csv, write_results_csv, BiasReport, CellSummary, MccGap, MetricStats, ModeSummary, NamedHistogram,
    RunRecord, REFERENCE_MCC,
};
pub use wilcoxon::{bonferroni_threshold, is_significant, wilcoxon_right, WilcoxonMethod, WilcoxonResult, EXACT_LIMIT};

/// Wheeze is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Argument(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Predictions inverted: tp <-> fn, tn <-> fp.
    pub fn inverted(&self) -> Self {
        ConfusionCounts {
            tp: self.fn_,
            tn: self.fp,
            fp: self.tn,
            fn_: self.tp,
        }
    }
}

pub const METRIC_NAMES: [&str; 6] = ["accuracy", "precision", "sensitivity", "f1", "specificity", "mcc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    pub specificity: f64,
    pub mcc: f64,
    /// Metrics whose denominator was zero and were set to 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl MetricsReport {
    /// Values in METRIC_NAMES order.
    pub fn values(&self) -> [f64; 6] {
        [self.accuracy, self.precision, self.sensitivity, self.f1, self.specificity, self.mcc]
    }
}

pub fn metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyInput("no evaluated events".into()));
    }
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let mut undefined = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64| -> f64 {
        if den == 0.0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num / den
        }
    };
    let accuracy = ratio("accuracy", tp + tn, total as f64);
    let precision = ratio("precision", tp, tp + fp);
    let sensitivity = ratio("sensitivity", tp, tp + fn_);
    let f1 = ratio("f1", 2.0 * precision * sensitivity, precision + sensitivity);
    let specificity = ratio("specificity", tn, tn + fp);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio("mcc", tp * tn - fp * fn_, den).clamp(-1.0, 1.0);
    Ok(MetricsReport {
        accuracy,
        precision,
        sensitivity,
        f1,
        specificity,
        mcc,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    #[test]
    fn perfect_classifier_on_test_totals() {
        let m = metrics(&counts(725, 1129, 0, 0)).unwrap();
        assert_eq!(m.values(), [1.0; 6]);
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn hand_worked_example() {
        let m = metrics(&counts(50, 40, 10, 0)).unwrap();
        assert!((m.accuracy - 0.9).abs() < 1e-12);
        assert!((m.precision - 50.0 / 60.0).abs() < 1e-12);
        assert_eq!(m.sensitivity, 1.0);
        assert!((m.f1 - 100.0 / 110.0).abs() < 1e-12);
        assert!((m.specificity - 0.8).abs() < 1e-12);
        // 2000 / sqrt(60 * 50 * 50 * 40)
        assert!((m.mcc - 2000.0 / 6_000_000f64.sqrt()).abs() < 1e-12);
        assert!((m.mcc - 0.8165).abs() < 5e-5);
    }

    #[test]
    fn no_positive_predictions_is_flagged() {
        let m = metrics(&counts(0, 30, 0, 20)).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.contains(&"precision".to_string()));
        assert!(m.undefined.contains(&"mcc".to_string()));
    }

    #[test]
    fn empty_counts_rejected() {
        assert!(matches!(metrics(&ConfusionCounts::default()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn counting_predictions() {
        let c = ConfusionCounts::from_predictions(&[true, true, false, false, true], &[true, false, false, true, true]).unwrap();
        assert_eq!(c, counts(2, 1, 1, 1));
    }

    proptest! {
        #[test]
        fn inversion_flips_mcc(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
            let c = counts(tp, tn, fp, fn_);
            prop_assume!(c.total() > 0);
            let a = metrics(&c).unwrap();
            let b = metrics(&c.inverted()).unwrap();
            prop_assert!((a.mcc + b.mcc).abs() < 1e-12);
            prop_assert!((a.accuracy + b.accuracy - 1.0).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a.mcc));
            for v in &a.values()[..5] {
                prop_assert!((0.0..=1.0).contains(v));
            }
            if a.precision > 0.0 && a.sensitivity > 0.0 {
                let harmonic = 2.0 / (1.0 / a.precision + 1.0 / a.sensitivity);
                prop_assert!((a.f1 - harmonic).abs() < 1e-12);
            }
        }
    }
}
