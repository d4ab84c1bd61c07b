//! Browser bindings for three views of the duration bias: the Burr duration
//! law, the zero-padded spectrogram of one synthetic event, and the probe that
//! classifies events from padding length alone.

use rand::seq::SliceRandom;
use wasm_bindgen::prelude::*;

use wheeze_core::corpus::{slice_event, AudioRecording, EventClass, LabeledEvent, Provenance, ANALYSIS_RATE};
use wheeze_core::dsp::{normalize01, padding_fraction, prepare_segment, stft_magnitude, StftConfig};
use wheeze_core::eventgen::{sample_duration, BurrParams, EventMode, GenerationConfig};
use wheeze_core::experiment::padding_probe;
use wheeze_core::rng::{mix, rng_from_seed};
use wheeze_core::synth::{synth_recording, SynthConfig};
use wheeze_core::Result;

fn js_err(e: wheeze_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn generation(alpha: f64, c: f64, k: f64, lo: f64, hi: f64) -> Result<GenerationConfig> {
    let mut cfg = GenerationConfig::new(EventMode::Vd, 0);
    cfg.burr = BurrParams::new(alpha, c, k)?;
    cfg.vd_min = lo;
    cfg.vd_max = hi;
    cfg.fd_duration = cfg.fd_duration.max(lo).min(hi);
    cfg.validate()?;
    Ok(cfg)
}

/// Truncated Burr density at `points` evenly spaced durations in `[lo, hi]`.
pub fn density(alpha: f64, c: f64, k: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    let cfg = generation(alpha, c, k, lo, hi)?;
    let mass = cfg.burr.cdf(hi) - cfg.burr.cdf(lo);
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points).map(|i| Ok(cfg.burr.pdf(lo + i as f64 * step)? / mass)).collect()
}

#[wasm_bindgen]
pub fn burr_density(alpha: f64, c: f64, k: f64, lo: f64, hi: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    density(alpha, c, k, lo, hi, points).map_err(js_err)
}

/// Density histogram of `n` seeded draws over `bins` equal bins of `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub fn histogram(alpha: f64, c: f64, k: f64, lo: f64, hi: f64, n: usize, bins: usize, seed: u64) -> Result<Vec<f64>> {
    let cfg = generation(alpha, c, k, lo, hi)?;
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0.0; bins];
    for _ in 0..n {
        let d = sample_duration(&mut rng, &cfg)?;
        counts[(((d - lo) / width) as usize).min(bins - 1)] += 1.0;
    }
    let scale = 1.0 / (n.max(1) as f64 * width);
    Ok(counts.into_iter().map(|v| v * scale).collect())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn burr_histogram(
    alpha: f64,
    c: f64,
    k: f64,
    lo: f64,
    hi: f64,
    n: usize,
    bins: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    histogram(alpha, c, k, lo, hi, n, bins, seed).map_err(js_err)
}

/// Normalized 257 x 59 magnitude spectrogram of one zero-padded event.
#[wasm_bindgen]
pub struct EventView {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    duration: f64,
    start: f64,
}

#[wasm_bindgen]
impl EventView {
    /// Row-major, one row per frequency bin from 0 Hz upwards.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[wasm_bindgen(getter)]
    pub fn duration(&self) -> f64 {
        self.duration
    }

    #[wasm_bindgen(getter)]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[wasm_bindgen(getter)]
    pub fn padding_fraction(&self) -> f64 {
        padding_fraction((self.duration * f64::from(ANALYSIS_RATE)).round() as usize)
    }
}

/// Cuts the first annotated wheeze of synthetic recording `seed` and returns
/// its spectrogram. A positive `duration_s` replaces the annotated length.
pub fn spectrogram(seed: u64, snr_db: f64, duration_s: f64) -> Result<EventView> {
    let cfg = SynthConfig {
        n_recordings: 1,
        recording_s: 6.0,
        wheezes_per_recording: 1,
        seed,
        snr_db: (snr_db, snr_db),
        confounders_per_recording: 0,
        ..SynthConfig::default()
    };
    let rec = synth_recording(&cfg, 0)?;
    let wheeze = &rec.wheezes[0];
    let duration = if duration_s > 0.0 { duration_s.min(2.0) } else { wheeze.duration() };
    let start = wheeze.start.min(cfg.recording_s - duration).max(0.0);
    let event = LabeledEvent {
        recording_id: rec.id.clone(),
        start,
        end: start + duration,
        class: EventClass::Wheeze,
        provenance: Provenance::Annotated,
    };
    let audio = AudioRecording::new(&rec.id, rec.samples, ANALYSIS_RATE)?;
    let samples = slice_event(&audio, &event)?;
    let segment = prepare_segment(samples)?;
    let spec = normalize01(&stft_magnitude(&segment, &StftConfig::default())?);
    Ok(EventView {
        values: spec.values().to_vec(),
        rows: spec.rows(),
        cols: spec.cols(),
        duration,
        start,
    })
}

#[wasm_bindgen]
pub fn event_spectrogram(seed: u64, snr_db: f64, duration_s: f64) -> std::result::Result<EventView, JsError> {
    spectrogram(seed, snr_db, duration_s).map_err(js_err)
}

#[wasm_bindgen]
pub struct ProbeView {
    pub mcc: f64,
    pub accuracy: f64,
    pub tp: u32,
    pub tn: u32,
    pub fp: u32,
    pub fn_: u32,
}

/// Fits the padding-length probe on `n_events` simulated events, 40 % wheezes
/// with Burr durations, and scores it on a held-out quarter. Negatives last
/// `fd_duration` seconds when `fixed` is set and follow the wheeze law
/// otherwise.
pub fn probe(fixed: bool, fd_duration: f64, n_events: usize, seed: u64) -> Result<ProbeView> {
    let mode = if fixed { EventMode::Fd } else { EventMode::Vd };
    let wheeze_law = GenerationConfig::new(EventMode::Vd, seed);
    let mut negative_law = GenerationConfig::new(mode, seed);
    negative_law.fd_duration = fd_duration;
    negative_law.validate()?;

    let mut rng = rng_from_seed(mix(&[seed, mode.tag()]));
    let n = n_events.max(8);
    let n_wheeze = n * 2 / 5;
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let wheeze = i < n_wheeze;
        let law = if wheeze { &wheeze_law } else { &negative_law };
        events.push((sample_duration(&mut rng, law)?, wheeze));
    }
    events.shuffle(&mut rng);
    let (test, train) = events.split_at(n / 4);
    let (_, counts, report) = padding_probe(train, test)?;
    Ok(ProbeView {
        mcc: report.mcc,
        accuracy: report.accuracy,
        tp: counts.tp as u32,
        tn: counts.tn as u32,
        fp: counts.fp as u32,
        fn_: counts.fn_ as u32,
    })
}

#[wasm_bindgen]
pub fn padding_probe_view(fixed: bool, fd_duration: f64, n_events: usize, seed: u64) -> std::result::Result<ProbeView, JsError> {
    probe(fixed, fd_duration, n_events, seed).map_err(js_err)
}
