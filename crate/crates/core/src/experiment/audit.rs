use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{open, read_json, require, write_json, ExperimentConfig, RunFile};
use crate::corpus::{EventClass, LabeledEvent, Provenance, Split, ANALYSIS_RATE};
use crate::dsp::padding_fraction;
use crate::error::{Error, Result};
use crate::eval::{
    bias_report, fn_duration_histogram, metrics, write_histogram_csv, write_results_csv, BiasReport, ConfusionCounts, MetricsReport,
    NamedHistogram,
};
use crate::eventgen::{read_event_csv, EventMode};
use crate::features::read_feature_csv;
use crate::io_util::write_atomic;
use crate::models::{train_feature_model, FeatureModel, HyperParams, TrainOptions};

use super::run::PredictionRow;

/// Logistic regression on the zero-padding share of the 2 s segment alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub mode: EventMode,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: BiasReport,
    pub probes: Vec<ProbeResult>,
    pub runs: Vec<RunFile>,
}

/// Ridge weight of the probe, small enough that the slope is not capped.
pub const PROBE_L2: f64 = 1e-4;

fn padding_row(duration: f64) -> Vec<f64> {
    vec![padding_fraction((duration * f64::from(ANALYSIS_RATE)).round() as usize)]
}

/// Trains the padding-fraction probe on `(duration, is_wheeze)` pairs and
/// scores it on the test pairs.
pub fn padding_probe(train: &[(f64, bool)], test: &[(f64, bool)]) -> Result<(FeatureModel, ConfusionCounts, MetricsReport)> {
    let x: Vec<Vec<f64>> = train.iter().map(|t| padding_row(t.0)).collect();
    let y: Vec<bool> = train.iter().map(|t| t.1).collect();
    let model = train_feature_model(&HyperParams::Logistic { l2: PROBE_L2 }, &x, &y, &TrainOptions::default())?;
    let truth: Vec<bool> = test.iter().map(|t| t.1).collect();
    let predicted: Vec<bool> = test.iter().map(|t| model.predict(&padding_row(t.0))).collect();
    let counts = ConfusionCounts::from_predictions(&truth, &predicted)?;
    let report = metrics(&counts)?;
    Ok((model, counts, report))
}

fn wheeze_event(id: &str, start: f64, end: f64) -> LabeledEvent {
    LabeledEvent {
        recording_id: id.to_string(),
        start,
        end,
        class: EventClass::Wheeze,
        provenance: Provenance::Annotated,
    }
}

fn summary_text(report: &BiasReport, probes: &[ProbeResult]) -> String {
    let mut s = String::new();
    for m in &report.modes {
        let _ = write!(s, "{} mode", m.mode);
        match m.adjusted_alpha {
            Some(a) => {
                let _ = writeln!(s, ", Bonferroni threshold {a:.4} over {} comparisons", m.comparisons);
            }
            None => s.push('\n'),
        }
        let _ = writeln!(
            s,
            "{:<8} {:>4} {:>15} {:>15} {:>15} {:>10} {:>4}",
            "model", "runs", "accuracy", "f1", "mcc", "p(mcc)", "sig"
        );
        for c in &m.cells {
            let cell = |name: &str| {
                let st = c.stat(name).unwrap();
                format!("{:.3} ± {:.3}", st.mean, st.std)
            };
            let mcc = c.stat("mcc").unwrap();
            let p = mcc.p_value.map_or("-".to_string(), |p| format!("{p:.4}"));
            let _ = writeln!(
                s,
                "{:<8} {:>4} {:>15} {:>15} {:>15} {:>10} {:>4}",
                c.family.label(),
                c.n_runs,
                cell("accuracy"),
                cell("f1"),
                cell("mcc"),
                p,
                if mcc.significant { "*" } else { "" }
            );
        }
        s.push('\n');
    }
    if !report.gaps.is_empty() {
        let _ = writeln!(s, "FD - VD mean MCC");
        for g in &report.gaps {
            let reference = match (g.reference_fd_mcc, g.reference_vd_mcc) {
                (Some(f), Some(v)) => format!("  (reference {f:.3} vs {v:.3})"),
                _ => String::new(),
            };
            let _ = writeln!(
                s,
                "{:<8} {:.3} - {:.3} = {:+.3}{reference}",
                g.family.label(),
                g.fd_mcc,
                g.vd_mcc,
                g.gap
            );
        }
        s.push('\n');
    }
    for h in &report.histograms {
        let _ = write!(s, "{} {} run {}: ", h.mode, h.family.label(), h.run);
        if h.histogram.fn_total() == 0 {
            s.push_str("no false negatives\n");
            continue;
        }
        let _ = writeln!(
            s,
            "{} false negatives, {:.0}% shorter than 0.325 s, {} occupied bins",
            h.histogram.fn_total(),
            100.0 * h.histogram.fn_share_below(0.325),
            h.histogram.occupied_fn_bins()
        );
    }
    if !probes.is_empty() {
        s.push('\n');
        for p in probes {
            let _ = writeln!(s, "padding-only probe {}: MCC {:.3}", p.mode, p.metrics.mcc);
        }
    }
    s
}

/// Reads every run of the configured modes and families, builds the bias
/// report with false-negative duration histograms for each best run, and
/// fits the padding-only probe per mode.
pub fn cmd_audit(cfg: &ExperimentConfig) -> Result<AuditOutcome> {
    cfg.validate()?;
    let layout = cfg.layout();
    let e = &cfg.experiment;
    let mut paths = Vec::new();
    for &mode in &e.modes {
        for &family in &e.families {
            for run in 0..e.n_runs {
                paths.push(layout.run_dir(mode, family, run).join("metrics.json"));
            }
        }
        for split in [Split::Train, Split::Test] {
            paths.push(layout.features(mode, split));
        }
        paths.push(layout.events(mode, Split::Test));
    }
    require(paths.clone())?;

    let runs: Vec<RunFile> = paths
        .iter()
        .filter(|p| p.ends_with("metrics.json"))
        .map(|p| read_json::<RunFile>(p))
        .collect::<Result<_>>()?;
    let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
    let mut report = bias_report(&records, cfg.audit.alpha)?;

    let mut histograms = Vec::new();
    let mut probes = Vec::new();
    for summary in &report.modes {
        let mode = summary.mode;
        let wheezes: Vec<LabeledEvent> = read_event_csv(open(&layout.events(mode, Split::Test))?)?
            .iter()
            .filter(|r| r.class == EventClass::Wheeze)
            .map(|r| r.to_event())
            .collect();
        for cell in &summary.cells {
            let path = layout.run_dir(mode, cell.family, cell.best_run).join("predictions.csv");
            require(vec![path.clone()])?;
            let mut reader = csv::Reader::from_reader(open(&path)?);
            let mut fns = Vec::new();
            for row in reader.deserialize::<PredictionRow>() {
                let row = row?;
                if row.class == EventClass::Wheeze && row.predicted == EventClass::Random {
                    fns.push(wheeze_event(&row.recording_id, row.start_s, row.end_s));
                }
            }
            let histogram = fn_duration_histogram(&fns, &wheezes, cfg.audit.hist_bin_width)?;
            histograms.push(NamedHistogram {
                mode,
                family: cell.family,
                run: cell.best_run,
                histogram,
            });
        }

        let pairs = |split: Split| -> Result<Vec<(f64, bool)>> {
            Ok(read_feature_csv(open(&layout.features(mode, split))?)?
                .into_iter()
                .map(|r| (r.duration, r.label.is_positive()))
                .collect())
        };
        match padding_probe(&pairs(Split::Train)?, &pairs(Split::Test)?) {
            Ok((_, counts, metrics)) => probes.push(ProbeResult { mode, counts, metrics }),
            Err(err) => log::warn!("{mode}: padding probe could not be fitted: {err}"),
        }
    }
    report.histograms = histograms;

    let dir = layout.audit_dir();
    write_json(&dir.join("bias_report.json"), &report)?;
    for m in &report.modes {
        let name = format!("results_{}.csv", m.mode.as_str().to_ascii_lowercase());
        write_atomic(&dir.join(name), write_results_csv(m)?.as_bytes())?;
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["model", "fd_mcc", "vd_mcc", "gap", "reference_fd_mcc", "reference_vd_mcc"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for g in &report.gaps {
            w.write_record([
                g.family.as_str().to_string(),
                g.fd_mcc.to_string(),
                g.vd_mcc.to_string(),
                g.gap.to_string(),
                opt(g.reference_fd_mcc),
                opt(g.reference_vd_mcc),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&dir, e))?;
    }
    write_atomic(&dir.join("gaps.csv"), &buf)?;
    for h in &report.histograms {
        let name = format!("{}_{}.csv", h.mode.as_str().to_ascii_lowercase(), h.family.as_str());
        write_atomic(&dir.join("histograms").join(name), write_histogram_csv(&h.histogram)?.as_bytes())?;
    }
    write_json(&dir.join("probe.json"), &probes)?;
    write_atomic(&dir.join("summary.txt"), summary_text(&report, &probes).as_bytes())?;

    Ok(AuditOutcome { report, probes, runs })
}
