//! Acceptance gate. Prints one PASS / FAIL / SKIP line per criterion and exits
//! nonzero when any criterion fails.
//!
//! Criterion 9 runs only when `WHEEZE_RSD_DIR` points at the public respiratory
//! sound corpus (WAV files plus cycle annotation files). The split manifest is
//! taken from `WHEEZE_RSD_SPLIT`, falling back to
//! `<dir>/ICBHI_challenge_train_test.txt`; `WHEEZE_RSD_CONFIG` may name a TOML
//! file that replaces the default experiment settings.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wheeze_core::corpus::EventClass;
use wheeze_core::dsp::{prepare_segment, stft_magnitude, StftConfig};
use wheeze_core::eval::{metrics, wilcoxon_right, ConfusionCounts, DurationHistogram};
use wheeze_core::eventgen::{sample_duration, BurrParams, EventMode, GenerationConfig};
use wheeze_core::experiment::{cmd_audit, cmd_prepare, cmd_run, AuditOutcome, ExperimentConfig, PredictionRow, PrepareSummary};
use wheeze_core::features::{FeatureConfig, FeatureExtractor, N_EVENT_FEATURES, N_FRAME_FEATURES};
use wheeze_core::models::{cnn_grad_check, BnMode, CnnArchitecture, CnnWeights, Family};
use wheeze_core::synth::{write_synth_corpus, SynthConfig};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Outcome = std::result::Result<Verdict, String>;

fn check(ok: bool, detail: String) -> Outcome {
    Ok(if ok { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
}

fn within(limit: Duration, started: Instant, verdict: Verdict) -> Verdict {
    let elapsed = started.elapsed();
    match verdict {
        Verdict::Pass(d) if elapsed > limit => Verdict::Fail(format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
        v => v,
    }
}

fn spectrogram_shape() -> Outcome {
    let samples: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.3).sin()).collect();
    let segment = prepare_segment(&samples).map_err(|e| e.to_string())?;
    let spec = stft_magnitude(&segment, &StftConfig::default()).map_err(|e| e.to_string())?;
    check(
        segment.len() == 8000 && spec.rows() == 257 && spec.cols() == 59,
        format!("{} samples -> {} x {}", segment.len(), spec.rows(), spec.cols()),
    )
}

fn feature_counts() -> Outcome {
    let extractor = FeatureExtractor::new(FeatureConfig::default());
    let samples: Vec<f64> = (0..1200).map(|i| (i as f64 * 0.5).sin() + 0.1 * (i as f64 * 1.7).cos()).collect();
    let v = extractor.extract(&samples, EventClass::Wheeze, 0.3).map_err(|e| e.to_string())?;
    check(
        N_FRAME_FEATURES == 47 && N_EVENT_FEATURES == 235 && v.values.len() == 235,
        format!(
            "{N_FRAME_FEATURES} per frame, {N_EVENT_FEATURES} per event, extracted {}",
            v.values.len()
        ),
    )
}

fn burr_cdf(x: f64, alpha: f64, c: f64, k: f64) -> f64 {
    1.0 - (1.0 + (x / alpha).powf(c)).powf(-k)
}

fn burr_sampler() -> Outcome {
    let (alpha, c, k) = (0.2266, 4.1906, 0.3029);
    let cfg = GenerationConfig::new(EventMode::Vd, 0);
    let (lo, hi) = (burr_cdf(0.1, alpha, c, k), burr_cdf(2.0, alpha, c, k));
    let truncated = |x: f64| (burr_cdf(x, alpha, c, k) - lo) / (hi - lo);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        draws.push(sample_duration(&mut rng, &cfg).map_err(|e| e.to_string())?);
    }
    draws.sort_by(f64::total_cmp);
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = truncated(x);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);

    let (mut a, mut b) = (0.0, 10.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if burr_cdf(m, alpha, c, k) < 0.5 {
            a = m;
        } else {
            b = m;
        }
    }
    let oracle = 0.5 * (a + b);
    let median = BurrParams::WHEEZE_DURATIONS.inverse_cdf(0.5).map_err(|e| e.to_string())?;
    check(
        ks < 0.01 && (median - oracle).abs() < 1e-6 && (median - 0.3814).abs() < 5e-5,
        format!("KS {ks:.4}, median {median:.6} vs bisection {oracle:.6}"),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut mcc_in_range = true;
    for i in 0..1000 {
        let scale = if i % 10 == 0 { 3 } else { 500 };
        let c = ConfusionCounts {
            tp: rng.gen_range(0..scale),
            tn: rng.gen_range(0..scale),
            fp: rng.gen_range(0..scale),
            fn_: rng.gen_range(0..scale),
        };
        if c.total() == 0 {
            continue;
        }
        let m = metrics(&c).map_err(|e| e.to_string())?;
        let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
        let safe = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        let ppv = safe(tp, tp + fp);
        let tpr = safe(tp, tp + fn_);
        let tnr = safe(tn, tn + fp);
        let npv = safe(tn, tn + fn_);
        let marginals_zero = tp + fp == 0.0 || tp + fn_ == 0.0 || tn + fp == 0.0 || tn + fn_ == 0.0;
        let mcc = if marginals_zero {
            0.0
        } else {
            (ppv * tpr * tnr * npv).sqrt() - ((1.0 - ppv) * (1.0 - tpr) * (1.0 - tnr) * (1.0 - npv)).sqrt()
        };
        let expected = [
            (tp + tn) / (tp + tn + fp + fn_),
            ppv,
            tpr,
            if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) },
            tnr,
            mcc,
        ];
        for (got, want) in m.values().iter().zip(expected) {
            worst = worst.max((got - want).abs());
        }
        mcc_in_range &= (-1.0..=1.0).contains(&m.mcc);
    }
    check(
        worst < 1e-12 && mcc_in_range,
        format!("max abs diff {worst:.2e} over 1000 matrices"),
    )
}

/// Doubled mid-ranks and the exact right tail by enumerating every sign pattern.
fn enumerated_p(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let ranks: Vec<u64> = diffs
        .iter()
        .map(|d| {
            let below = diffs.iter().filter(|e| e.abs() < d.abs()).count() as u64;
            let tied = diffs.iter().filter(|e| e.abs() == d.abs()).count() as u64;
            2 * below + tied + 1
        })
        .collect();
    let observed: u64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if w >= observed {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

fn wilcoxon_exactness() -> Outcome {
    let x: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
    let zeros = vec![0.0; 10];
    let all_positive = wilcoxon_right(&x, &zeros).map_err(|e| e.to_string())?.p_value;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for case in 0..100 {
        let diffs: Vec<f64> = (0..10)
            .map(|_| {
                let magnitude = if case % 2 == 0 {
                    rng.gen_range(0.01..1.0)
                } else {
                    rng.gen_range(1..5) as f64
                };
                if rng.gen_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        let p = wilcoxon_right(&diffs, &zeros).map_err(|e| e.to_string())?.p_value;
        if p != enumerated_p(&diffs) {
            mismatches += 1;
        }
    }
    check(
        all_positive == 1.0 / 1024.0 && mismatches == 0,
        format!(
            "all-positive p = {all_positive} (1/1024 = {}), {mismatches} of 100 random cases differ",
            1.0 / 1024.0
        ),
    )
}

fn cnn_correctness() -> Outcome {
    let arch = CnnArchitecture::fd_best();
    let shapes_ok = arch.conv_shape() == [251, 53, 64] && arch.pool_shape() == [250, 52, 64];
    let weights = CnnWeights::<f64>::init(arch, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let input: Vec<f64> = (0..arch.input_len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut worst = 0.0f64;
    for (mode, label) in [(BnMode::Running, true), (BnMode::Batch, false)] {
        let report = cnn_grad_check(&weights, &input, label, mode, 200, 21).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_rel_error);
    }
    check(
        shapes_ok && worst < 1e-4,
        format!(
            "conv {:?}, pool {:?}, gradient check max relative error {worst:.2e}",
            arch.conv_shape(),
            arch.pool_shape()
        ),
    )
}

struct SyntheticExperiment {
    _dir: tempfile::TempDir,
    cfg: ExperimentConfig,
    prepared: PrepareSummary,
    audit: AuditOutcome,
}

fn synthetic_experiment() -> std::result::Result<SyntheticExperiment, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("corpus");
    write_synth_corpus(&data, &SynthConfig::default()).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::default();
    cfg.data.data_dir = data.clone();
    cfg.data.split_manifest = data.join("split.txt");
    cfg.experiment.output_dir = dir.path().join("out");
    cfg.experiment.families = vec![Family::Logistic, Family::Boost];
    cfg.experiment.search_budget = 10;
    let prepared = cmd_prepare(&cfg).map_err(|e| e.to_string())?;
    let runs = cmd_run(&cfg).map_err(|e| e.to_string())?;
    if !runs.failed.is_empty() {
        return Err(format!("{} runs failed", runs.failed.len()));
    }
    let audit = cmd_audit(&cfg).map_err(|e| e.to_string())?;
    Ok(SyntheticExperiment {
        _dir: dir,
        cfg,
        prepared,
        audit,
    })
}

fn duration_bias(x: &SyntheticExperiment) -> Outcome {
    let events: Vec<usize> = x
        .prepared
        .modes
        .iter()
        .map(|m| m.train_wheeze + m.train_random + m.test_wheeze + m.test_random)
        .collect();
    let mean_mcc = |mode| {
        x.audit
            .report
            .cell(mode, Family::Boost)
            .and_then(|c| c.stat("mcc"))
            .map(|s| s.mean)
            .ok_or_else(|| format!("no Boost cell for {mode}"))
    };
    let fd = mean_mcc(EventMode::Fd)?;
    let vd = mean_mcc(EventMode::Vd)?;
    let probe = |mode| {
        x.audit
            .probes
            .iter()
            .find(|p| p.mode == mode)
            .map(|p| p.metrics.mcc)
            .ok_or_else(|| format!("no probe for {mode}"))
    };
    let (probe_fd, probe_vd) = (probe(EventMode::Fd)?, probe(EventMode::Vd)?);
    check(
        events.iter().all(|&n| n == 600) && fd - vd >= 0.30 && probe_fd >= 0.8 && probe_vd <= 0.2,
        format!(
            "events per mode {events:?}; Boost MCC FD {fd:.3} VD {vd:.3} gap {:+.3}; padding probe FD {probe_fd:.3} VD {probe_vd:.3}",
            fd - vd
        ),
    )
}

fn missed_durations(x: &SyntheticExperiment, mode: EventMode, family: Family) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for run in 0..x.cfg.experiment.n_runs {
        let path = x.cfg.layout().run_dir(mode, family, run).join("predictions.csv");
        let mut reader = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
        for row in reader.deserialize::<PredictionRow>() {
            let row = row.map_err(|e| e.to_string())?;
            if row.class == EventClass::Wheeze && row.predicted == EventClass::Random {
                out.push(row.end_s - row.start_s);
            }
        }
    }
    Ok(out)
}

fn fn_histogram_audit(x: &SyntheticExperiment) -> Outcome {
    let fd = x.audit.report.mode(EventMode::Fd).ok_or("no FD summary")?;
    let best = fd
        .cells
        .iter()
        .max_by(|a, b| a.stat("mcc").unwrap().mean.total_cmp(&b.stat("mcc").unwrap().mean))
        .ok_or("no FD cells")?
        .family;
    let fd_fn = missed_durations(x, EventMode::Fd, best)?;
    let vd_fn = missed_durations(x, EventMode::Vd, best)?;
    let share = fd_fn.iter().filter(|&&d| d < 0.325).count() as f64 / fd_fn.len().max(1) as f64;
    let bins = DurationHistogram::empty(0.05).map_err(|e| e.to_string())?;
    let occupied: BTreeSet<usize> = vd_fn.iter().map(|&d| bins.bin_of(d)).collect();
    check(
        !fd_fn.is_empty() && share >= 0.8 && occupied.len() >= 5,
        format!(
            "{} over {} runs: FD {} false negatives, {:.0}% below 0.325 s; VD {} false negatives in {} bins",
            best.label(),
            x.cfg.experiment.n_runs,
            fd_fn.len(),
            100.0 * share,
            vd_fn.len(),
            occupied.len()
        ),
    )
}

fn rsd_corpus() -> Outcome {
    let Some(dir) = std::env::var_os("WHEEZE_RSD_DIR").map(PathBuf::from) else {
        return Ok(Verdict::Skip("WHEEZE_RSD_DIR not set".into()));
    };
    let mut cfg = match std::env::var_os("WHEEZE_RSD_CONFIG") {
        Some(path) => ExperimentConfig::load(Path::new(&path)).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    cfg.data.split_manifest = std::env::var_os("WHEEZE_RSD_SPLIT")
        .map(PathBuf::from)
        .unwrap_or_else(|| dir.join("ICBHI_challenge_train_test.txt"));
    cfg.data.data_dir = dir;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    cfg.experiment.output_dir = out.path().to_path_buf();

    let prepared = cmd_prepare(&cfg).map_err(|e| e.to_string())?;
    let runs = cmd_run(&cfg).map_err(|e| e.to_string())?;
    if !runs.failed.is_empty() {
        return Ok(Verdict::Fail(format!("{} runs failed", runs.failed.len())));
    }
    let audit = cmd_audit(&cfg).map_err(|e| e.to_string())?;
    let shares: Vec<f64> = prepared.modes.iter().map(|m| 100.0 * m.random_share()).collect();
    let best = |mode| {
        audit
            .report
            .mode(mode)
            .map(|m| {
                m.cells
                    .iter()
                    .map(|c| c.stat("mcc").unwrap().mean)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .unwrap_or(f64::NAN)
    };
    let (fd, vd) = (best(EventMode::Fd), best(EventMode::Vd));
    check(
        shares.iter().all(|s| (s - 60.0).abs() <= 5.0) && fd - vd >= 0.20,
        format!("random share {shares:.1?} %; best MCC FD {fd:.3} VD {vd:.3}"),
    )
}

fn report(id: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let verdict = match f() {
        Ok(v) => match limit {
            Some(l) => within(l, started, v),
            None => v,
        },
        Err(e) => Verdict::Fail(format!("error: {e}")),
    };
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail, ok) = match verdict {
        Verdict::Pass(d) => ("PASS", d, true),
        Verdict::Fail(d) => ("FAIL", d, false),
        Verdict::Skip(d) => ("SKIP", d, true),
    };
    println!("criterion {id} {tag}  {title}: {detail} [{secs:.1} s]");
    ok
}

fn main() {
    // `cargo test -- <filter>` passes harness flags through; ignore them
    let list_only = std::env::args().any(|a| a == "--list");
    if list_only {
        return;
    }
    let s = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, "spectrogram shape", Some(s(1)), spectrogram_shape);
    ok &= report(2, "feature counts", None, feature_counts);
    ok &= report(3, "Burr sampler", Some(s(5)), burr_sampler);
    ok &= report(4, "metrics oracle", None, metrics_oracle);
    ok &= report(5, "Wilcoxon exactness", Some(s(5)), wilcoxon_exactness);
    ok &= report(6, "CNN shapes and gradients", Some(s(60)), cnn_correctness);

    let started = Instant::now();
    match synthetic_experiment() {
        Ok(x) => {
            let build = started.elapsed();
            let limit = s(600).saturating_sub(build);
            ok &= report(7, "duration bias on the synthetic corpus", Some(limit), || duration_bias(&x));
            ok &= report(8, "false-negative durations", None, || fn_histogram_audit(&x));
            println!("synthetic experiment took {:.1} s", started.elapsed().as_secs_f64());
        }
        Err(e) => {
            ok &= report(7, "duration bias on the synthetic corpus", None, || Err(e.clone()));
            ok &= report(8, "false-negative durations", None, || Err(e));
        }
    }
    ok &= report(9, "public corpus", None, rsd_corpus);

    if !ok {
        std::process::exit(1);
    }
}
