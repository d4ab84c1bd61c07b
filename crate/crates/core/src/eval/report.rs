use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bonferroni_threshold, wilcoxon_right, ConfusionCounts, DurationHistogram, MetricsReport, METRIC_NAMES};
use crate::error::{Error, Result};
use crate::eventgen::EventMode;
use crate::models::Family;

/// Published mean test MCC per family as (FD, VD); report annotations only.
pub const REFERENCE_MCC: [(Family, f64, f64); 6] = [
    (Family::Logistic, 0.803, 0.306),
    (Family::Lda, 0.772, 0.275),
    (Family::SvmLinear, 0.743, 0.271),
    (Family::SvmRbf, 0.754, 0.198),
    (Family::Boost, 0.801, 0.317),
    (Family::Cnn, 0.918, 0.244),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub family: Family,
    pub mode: EventMode,
    pub run: usize,
    pub seed: u64,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Right-tailed signed-rank p-value against the baseline.
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: Family,
    pub n_runs: usize,
    pub metrics: Vec<MetricStats>,
    /// Run index with the highest MCC (lowest index on ties).
    pub best_run: usize,
}

impl CellSummary {
    pub fn stat(&self, metric: &str) -> Option<&MetricStats> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: EventMode,
    pub comparisons: usize,
    pub adjusted_alpha: Option<f64>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccGap {
    pub family: Family,
    pub fd_mcc: f64,
    pub vd_mcc: f64,
    pub gap: f64,
    pub reference_fd_mcc: Option<f64>,
    pub reference_vd_mcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedHistogram {
    pub mode: EventMode,
    pub family: Family,
    pub run: usize,
    pub histogram: DurationHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub alpha: f64,
    pub modes: Vec<ModeSummary>,
    pub gaps: Vec<MccGap>,
    #[serde(default)]
    pub histograms: Vec<NamedHistogram>,
}

impl BiasReport {
    pub fn mode(&self, mode: EventMode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn cell(&self, mode: EventMode, family: Family) -> Option<&CellSummary> {
        self.mode(mode)?.cells.iter().find(|c| c.family == family)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Aggregates per-run metrics into mean/std cells, tests every family against
/// the logistic baseline (paired by run index) and computes FD-VD MCC gaps.
pub fn bias_report(runs: &[RunRecord], alpha: f64) -> Result<BiasReport> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("no run records".into()));
    }
    let mut cells: BTreeMap<(EventMode, Family), BTreeMap<usize, &RunRecord>> = BTreeMap::new();
    for r in runs {
        if cells.entry((r.mode, r.family)).or_default().insert(r.run, r).is_some() {
            return Err(Error::Argument(format!(
                "duplicate run {} for {} {}",
                r.run,
                r.mode,
                r.family.as_str()
            )));
        }
    }
    let first = cells.values().next().unwrap();
    let run_ids: Vec<usize> = first.keys().copied().collect();
    for ((mode, family), cell) in &cells {
        if cell.keys().copied().collect::<Vec<_>>() != run_ids {
            return Err(Error::Argument(format!(
                "{mode} {} has runs {:?}, expected {:?}",
                family.as_str(),
                cell.keys().collect::<Vec<_>>(),
                run_ids
            )));
        }
    }
    let modes: Vec<EventMode> = EventMode::ALL.into_iter().filter(|m| cells.keys().any(|k| k.0 == *m)).collect();
    let families_of = |m: EventMode| -> Vec<Family> { cells.keys().filter(|k| k.0 == m).map(|k| k.1).collect() };
    if modes.len() == 2 && families_of(EventMode::Fd) != families_of(EventMode::Vd) {
        return Err(Error::Argument("FD and VD were evaluated with different model families".into()));
    }

    let mut summaries = Vec::new();
    for &mode in &modes {
        let families = families_of(mode);
        let baseline = cells.get(&(mode, Family::Logistic));
        let comparisons = families.iter().filter(|f| **f != Family::Logistic).count();
        let adjusted = if baseline.is_some() && comparisons > 0 {
            Some(bonferroni_threshold(alpha, comparisons)?)
        } else {
            None
        };
        let mut out_cells = Vec::new();
        for family in families {
            let cell = &cells[&(mode, family)];
            let values: Vec<[f64; 6]> = cell.values().map(|r| r.metrics.values()).collect();
            let mut metrics = Vec::new();
            for (k, name) in METRIC_NAMES.iter().enumerate() {
                let col: Vec<f64> = values.iter().map(|v| v[k]).collect();
                let (mean, std) = mean_std(&col);
                let p_value = match (baseline, adjusted) {
                    (Some(base), Some(_)) if family != Family::Logistic && col.len() >= 5 => {
                        let base_col: Vec<f64> = base.values().map(|r| r.metrics.values()[k]).collect();
                        Some(wilcoxon_right(&col, &base_col)?.p_value)
                    }
                    _ => None,
                };
                let significant = matches!((p_value, adjusted), (Some(p), Some(a)) if p < a);
                metrics.push(MetricStats {
                    metric: name.to_string(),
                    mean,
                    std,
                    p_value,
                    significant,
                });
            }
            let best_run = cell
                .values()
                .fold(None::<&RunRecord>, |best, r| match best {
                    Some(b) if b.metrics.mcc >= r.metrics.mcc => Some(b),
                    _ => Some(r),
                })
                .map(|r| r.run)
                .unwrap();
            out_cells.push(CellSummary {
                family,
                n_runs: cell.len(),
                metrics,
                best_run,
            });
        }
        summaries.push(ModeSummary {
            mode,
            comparisons,
            adjusted_alpha: adjusted,
            cells: out_cells,
        });
    }

    let mut report = BiasReport {
        alpha,
        modes: summaries,
        gaps: Vec::new(),
        histograms: Vec::new(),
    };
    if modes.len() == 2 {
        for family in families_of(EventMode::Fd) {
            let fd = report.cell(EventMode::Fd, family).unwrap().stat("mcc").unwrap().mean;
            let vd = report.cell(EventMode::Vd, family).unwrap().stat("mcc").unwrap().mean;
            let reference = REFERENCE_MCC.iter().find(|r| r.0 == family);
            report.gaps.push(MccGap {
                family,
                fd_mcc: fd,
                vd_mcc: vd,
                gap: fd - vd,
                reference_fd_mcc: reference.map(|r| r.1),
                reference_vd_mcc: reference.map(|r| r.2),
            });
        }
    }
    Ok(report)
}

/// One row per family: mean, std and p-value of every metric.
pub fn write_results_csv(summary: &ModeSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string(), "n_runs".to_string()];
    for m in METRIC_NAMES {
        for suffix in ["mean", "std", "p", "significant"] {
            header.push(format!("{m}_{suffix}"));
        }
    }
    w.write_record(&header)?;
    for cell in &summary.cells {
        let mut row = vec![cell.family.label().to_string(), cell.n_runs.to_string()];
        for m in &cell.metrics {
            row.push(format!("{:.6}", m.mean));
            row.push(format!("{:.6}", m.std));
            row.push(m.p_value.map(|p| format!("{p:.6}")).unwrap_or_default());
            row.push(m.significant.to_string());
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn write_histogram_csv(h: &DurationHistogram) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_start", "bin_end", "wheeze_count", "fn_count"])?;
    for i in 0..h.bin_starts.len() {
        w.write_record([
            format!("{:.3}", h.bin_starts[i]),
            format!("{:.3}", h.bin_end(i)),
            h.wheeze_counts[i].to_string(),
            h.fn_counts[i].to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics;

    fn record(family: Family, mode: EventMode, run: usize, c: ConfusionCounts) -> RunRecord {
        RunRecord {
            family,
            mode,
            run,
            seed: run as u64,
            counts: c,
            metrics: metrics(&c).unwrap(),
        }
    }

    fn counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    fn synthetic_runs(modes: &[EventMode]) -> Vec<RunRecord> {
        let mut v = Vec::new();
        for &mode in modes {
            for run in 0..10 {
                v.push(record(Family::Logistic, mode, run, counts(70, 100, 10, 20)));
                v.push(record(Family::Boost, mode, run, counts(80 + run as u64, 100, 10, 10)));
                v.push(record(Family::Lda, mode, run, counts(60 + run as u64 % 3, 98, 12, 30)));
            }
        }
        v
    }

    #[test]
    fn identical_modes_have_zero_gaps() {
        let r = bias_report(&synthetic_runs(&[EventMode::Fd, EventMode::Vd]), 0.01).unwrap();
        assert_eq!(r.gaps.len(), 3);
        assert!(r.gaps.iter().all(|g| g.gap == 0.0));
    }

    #[test]
    fn mean_and_std_match_recomputation() {
        let runs = synthetic_runs(&[EventMode::Fd]);
        let r = bias_report(&runs, 0.01).unwrap();
        let cell = r.cell(EventMode::Fd, Family::Boost).unwrap();
        let mccs: Vec<f64> = runs.iter().filter(|x| x.family == Family::Boost).map(|x| x.metrics.mcc).collect();
        let mean = mccs.iter().sum::<f64>() / 10.0;
        let var = mccs.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / 9.0;
        let s = cell.stat("mcc").unwrap();
        assert!((s.mean - mean).abs() < 1e-12 && (s.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(cell.best_run, 9);
        // Boost beats the baseline in every run
        assert!((s.p_value.unwrap() - 1.0 / 1024.0).abs() < 1e-15);
        assert!(s.significant);
        assert_eq!(r.mode(EventMode::Fd).unwrap().adjusted_alpha, Some(0.005));
        assert!(r
            .cell(EventMode::Fd, Family::Logistic)
            .unwrap()
            .stat("mcc")
            .unwrap()
            .p_value
            .is_none());
    }

    #[test]
    fn run_count_mismatch_rejected() {
        let mut runs = synthetic_runs(&[EventMode::Fd, EventMode::Vd]);
        runs.pop();
        assert!(matches!(bias_report(&runs, 0.01), Err(Error::Argument(_))));
    }

    #[test]
    fn csv_layouts() {
        let r = bias_report(&synthetic_runs(&[EventMode::Fd]), 0.01).unwrap();
        let text = write_results_csv(r.mode(EventMode::Fd).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 2 + 6 * 4);
        let h = DurationHistogram::empty(0.05).unwrap();
        let hist = write_histogram_csv(&h).unwrap();
        assert!(hist.starts_with("bin_start,bin_end,wheeze_count,fn_count\n0.100,0.150,0,0\n"));
    }
}
