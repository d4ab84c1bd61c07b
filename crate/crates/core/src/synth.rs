//! Synthetic lung-sound corpus with known ground truth.
//!
//! Each recording is breath-modulated colored noise with scattered broadband
//! bursts. Annotated wheezes are faint narrowband chirps whose durations
//! follow the truncated Burr law; unannotated tonal confounders drawn from the
//! same generator make the acoustic task hard on purpose.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{encode_wav, serialize_annotations, EventClass, LabeledEvent, Provenance, Split, ANALYSIS_RATE};
use crate::error::{Error, Result};
use crate::eventgen::{sample_duration, EventMode, GenerationConfig};
use crate::io_util::write_atomic;
use crate::rng::{mix, rng_from_seed, PipelineRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_recordings: usize,
    pub recording_s: f64,
    pub wheezes_per_recording: usize,
    /// Every `test_every`-th recording goes to the test split.
    pub test_every: usize,
    pub seed: u64,
    /// Tone power over background power, drawn uniformly in this range.
    pub snr_db: (f64, f64),
    pub confounders_per_recording: usize,
    pub bursts_per_recording: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_recordings: 120,
            recording_s: 20.0,
            wheezes_per_recording: 2,
            test_every: 4,
            seed: 7,
            snr_db: (-22.0, -10.0),
            confounders_per_recording: 3,
            bursts_per_recording: 8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_recordings == 0 || self.wheezes_per_recording == 0 || self.test_every < 2 {
            return Err(Error::Argument(
                "synthetic corpus needs recordings, wheezes and a test stride of at least 2".into(),
            ));
        }
        // each wheeze gets its own slot of at least 2.5 s
        if self.recording_s < 2.5 * self.wheezes_per_recording as f64 {
            return Err(Error::Argument(format!(
                "{} s is too short for {} wheezes",
                self.recording_s, self.wheezes_per_recording
            )));
        }
        if !(self.snr_db.0 <= self.snr_db.1) {
            return Err(Error::Argument("snr range is reversed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub id: String,
    pub samples: Vec<f64>,
    pub wheezes: Vec<LabeledEvent>,
    pub split: Split,
}

fn normal(rng: &mut PipelineRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Faint chirp with a weaker second harmonic and 20 ms raised-cosine edges.
fn add_tone(out: &mut [f64], rng: &mut PipelineRng, start: usize, len: usize, amplitude: f64) {
    let fs = f64::from(ANALYSIS_RATE);
    let f0 = rng.gen_range(150.0..800.0);
    let sweep = rng.gen_range(-80.0..80.0);
    let edge = (0.02 * fs) as usize;
    let phase0 = rng.gen_range(0.0..2.0 * PI);
    let mut phase = phase0;
    for i in 0..len.min(out.len().saturating_sub(start)) {
        let t = i as f64 / len as f64;
        phase += 2.0 * PI * (f0 + sweep * t) / fs;
        let taper = if i < edge {
            0.5 - 0.5 * (PI * i as f64 / edge as f64).cos()
        } else if len - i < edge {
            0.5 - 0.5 * (PI * (len - i) as f64 / edge as f64).cos()
        } else {
            1.0
        };
        out[start + i] += amplitude * taper * (phase.sin() + 0.3 * (2.0 * phase).sin());
    }
}

fn snr_amplitude(rng: &mut PipelineRng, cfg: &SynthConfig, noise_power: f64) -> f64 {
    let snr = if cfg.snr_db.0 == cfg.snr_db.1 {
        cfg.snr_db.0
    } else {
        rng.gen_range(cfg.snr_db.0..cfg.snr_db.1)
    };
    (2.0 * noise_power * 10f64.powf(snr / 10.0)).sqrt()
}

/// Recording `index` of the corpus; independent of the other recordings.
pub fn synth_recording(cfg: &SynthConfig, index: usize) -> Result<SynthRecording> {
    cfg.validate()?;
    let fs = f64::from(ANALYSIS_RATE);
    let n = (cfg.recording_s * fs).round() as usize;
    let id = format!("synth_{index:03}");
    let mut rng = rng_from_seed(mix(&[cfg.seed, index as u64]));

    // breath noise: low-passed plus a little white noise, slowly modulated
    let a = 1.0 - (-2.0 * PI * 500.0 / fs).exp();
    let period = rng.gen_range(3.0..5.0);
    let phase = rng.gen_range(0.0..PI);
    let mut lp = 0.0;
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let w = normal(&mut rng);
            lp += a * (w - lp);
            let env = 0.4 + 0.6 * (PI * i as f64 / (period * fs) + phase).sin().powi(2);
            env * (lp + 0.3 * normal(&mut rng))
        })
        .collect();
    let noise_power = samples.iter().map(|v| v * v).sum::<f64>() / n as f64;

    for _ in 0..cfg.bursts_per_recording {
        let len = (rng.gen_range(0.02..0.4) * fs) as usize;
        let start = rng.gen_range(0..n - len);
        let gain = rng.gen_range(1.0..3.0) * noise_power.sqrt();
        for i in 0..len {
            let w = (PI * i as f64 / len as f64).sin();
            samples[start + i] += gain * w * normal(&mut rng);
        }
    }

    let durations = GenerationConfig::new(EventMode::Vd, cfg.seed);
    let slot = cfg.recording_s / cfg.wheezes_per_recording as f64;
    let mut wheezes = Vec::with_capacity(cfg.wheezes_per_recording);
    for k in 0..cfg.wheezes_per_recording {
        let d = (sample_duration(&mut rng, &durations)? * 1000.0).round() / 1000.0;
        let lo = k as f64 * slot + 0.1;
        let hi = (k + 1) as f64 * slot - 0.1 - d;
        let start = (rng.gen_range(lo..hi) * 1000.0).round() / 1000.0;
        let amplitude = snr_amplitude(&mut rng, cfg, noise_power);
        add_tone(&mut samples, &mut rng, (start * fs) as usize, (d * fs) as usize, amplitude);
        wheezes.push(LabeledEvent {
            recording_id: id.clone(),
            start,
            end: start + d,
            class: EventClass::Wheeze,
            provenance: Provenance::Annotated,
        });
    }

    let mut placed = 0;
    let mut attempts = 0;
    while placed < cfg.confounders_per_recording && attempts < 1000 {
        attempts += 1;
        let d = sample_duration(&mut rng, &durations)?;
        let start = rng.gen_range(0.0..cfg.recording_s - d);
        if wheezes.iter().any(|w| w.overlaps(start - 0.05, start + d + 0.05)) {
            continue;
        }
        let amplitude = snr_amplitude(&mut rng, cfg, noise_power);
        add_tone(&mut samples, &mut rng, (start * fs) as usize, (d * fs) as usize, amplitude);
        placed += 1;
    }

    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    samples.iter_mut().for_each(|v| *v *= 0.8 / peak);
    let split = if index % cfg.test_every == cfg.test_every - 1 {
        Split::Test
    } else {
        Split::Train
    };
    Ok(SynthRecording {
        id,
        samples,
        wheezes,
        split,
    })
}

pub fn synth_corpus(cfg: &SynthConfig) -> Result<Vec<SynthRecording>> {
    (0..cfg.n_recordings).map(|i| synth_recording(cfg, i)).collect()
}

/// Writes `<id>.wav`, `<id>.txt` and `split.txt` into `dir`.
pub fn write_synth_corpus(dir: &Path, cfg: &SynthConfig) -> Result<Vec<SynthRecording>> {
    let corpus = synth_corpus(cfg)?;
    let mut manifest = String::new();
    for rec in &corpus {
        write_atomic(&dir.join(format!("{}.wav", rec.id)), &encode_wav(&[&rec.samples], ANALYSIS_RATE))?;
        write_atomic(&dir.join(format!("{}.txt", rec.id)), serialize_annotations(&rec.wheezes).as_bytes())?;
        let _ = writeln!(manifest, "{}\t{}", rec.id, rec.split.as_str());
    }
    write_atomic(&dir.join("split.txt"), manifest.as_bytes())?;
    Ok(corpus)
}
