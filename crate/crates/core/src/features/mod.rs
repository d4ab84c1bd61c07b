//! Per-frame descriptors (47) and their per-event statistics (235).
//!
//! Frame features are computed on the raw magnitude spectrogram of the
//! prepared 2 s segment, never on the [0, 1]-normalized copy used by the CNN.
//! Undefined ratios on silent frames are reported as 0 so every output is
//! finite.

mod harmonic;
mod mfcc;
mod spectral;

use std::io::{Read, Write};

use crate::corpus::EventClass;
use crate::dsp::{self, Spectrogram, StftConfig, N_FRAMES};
use crate::error::{Error, Result};

pub use harmonic::{estimate_pitch, harmonic_features, pitch_class, N_HARMONIC};
pub use mfcc::{dct2_orthonormal, delta_mfcc, mfcc13, MelFilterbank, LOG_FLOOR, N_MFCC};
pub use spectral::{roughness, spectral_peaks, spectral_shape, zero_crossing_rate, BRIGHTNESS_CUTOFFS_HZ, N_SPECTRAL, ROLLOFF_PERCENTS};

pub const N_FRAME_FEATURES: usize = N_SPECTRAL + N_MFCC + N_MFCC + N_HARMONIC;
pub const STATISTICS: [&str; 5] = ["mean", "std", "median", "min", "max"];
pub const N_EVENT_FEATURES: usize = N_FRAME_FEATURES * STATISTICS.len();

/// Frame feature names, in row order.
pub const FRAME_FEATURE_NAMES: [&str; N_FRAME_FEATURES] = [
    "centroid",
    "spread",
    "zcr",
    "entropy",
    "flatness",
    "roughness",
    "irregularity",
    "flux",
    "brightness100",
    "brightness200",
    "brightness400",
    "brightness800",
    "rolloff95",
    "rolloff75",
    "rolloff25",
    "rolloff05",
    "mfcc01",
    "mfcc02",
    "mfcc03",
    "mfcc04",
    "mfcc05",
    "mfcc06",
    "mfcc07",
    "mfcc08",
    "mfcc09",
    "mfcc10",
    "mfcc11",
    "mfcc12",
    "mfcc13",
    "dmfcc01",
    "dmfcc02",
    "dmfcc03",
    "dmfcc04",
    "dmfcc05",
    "dmfcc06",
    "dmfcc07",
    "dmfcc08",
    "dmfcc09",
    "dmfcc10",
    "dmfcc11",
    "dmfcc12",
    "dmfcc13",
    "chroma_centroid",
    "chroma_peak",
    "pitch",
    "voicing",
    "inharmonicity",
];

/// Index of a frame feature by name.
pub fn frame_feature_index(name: &str) -> Option<usize> {
    FRAME_FEATURE_NAMES.iter().position(|&n| n == name)
}

/// Column index of `feature_stat` in the 235-vector.
pub fn event_feature_index(feature: &str, stat: &str) -> Option<usize> {
    let f = frame_feature_index(feature)?;
    let s = STATISTICS.iter().position(|&n| n == stat)?;
    Some(f * STATISTICS.len() + s)
}

/// `centroid_mean, centroid_std, ...` (feature-major, statistic-minor).
pub fn event_feature_names() -> Vec<String> {
    FRAME_FEATURE_NAMES
        .iter()
        .flat_map(|f| STATISTICS.iter().map(move |s| format!("{f}_{s}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate: f64,
    pub stft: StftConfig,
    pub mel_bands: usize,
    pub mel_max_hz: f64,
    pub pitch_min_hz: f64,
    pub pitch_max_hz: f64,
    /// Peaks are local maxima at least this fraction of the frame maximum.
    pub peak_threshold: f64,
    /// Inharmonicity is reported only when voicing reaches this value.
    pub voicing_threshold: f64,
    /// Count the 0th cepstral coefficient among the 13.
    pub include_c0: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 4000.0,
            stft: StftConfig::default(),
            mel_bands: 40,
            mel_max_hz: 2000.0,
            pitch_min_hz: 60.0,
            pitch_max_hz: 1000.0,
            peak_threshold: 0.01,
            voicing_threshold: 0.5,
            include_c0: true,
        }
    }
}

impl FeatureConfig {
    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.stft.fft_size as f64
    }

    pub fn filterbank(&self) -> MelFilterbank {
        MelFilterbank::new(self.mel_bands, self.stft.n_bins(), self.bin_hz(), self.mel_max_hz)
    }
}

pub type FrameFeatureRow = [f64; N_FRAME_FEATURES];

#[derive(Debug, Clone, PartialEq)]
pub struct EventFeatureVector {
    pub values: Vec<f64>,
    pub label: EventClass,
    pub duration: f64,
}

/// Builds and caches the mel filterbank for repeated extraction.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    bank: MelFilterbank,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new(FeatureConfig::default())
    }
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Self {
        let bank = cfg.filterbank();
        FeatureExtractor { cfg, bank }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// Frame rows for a raw spectrogram and the signal it was computed from.
    pub fn frame_rows(&self, spec: &Spectrogram, signal: &[f64]) -> Vec<FrameFeatureRow> {
        let cfg = &self.cfg;
        let columns: Vec<Vec<f64>> = (0..spec.cols()).map(|t| spec.column(t)).collect();
        let mfccs: Vec<[f64; N_MFCC]> = columns.iter().map(|c| mfcc13(c, &self.bank, cfg)).collect();
        let deltas = delta_mfcc(&mfccs);
        (0..spec.cols())
            .map(|t| {
                let lo = t * cfg.stft.hop;
                let frame = &signal[lo..lo + cfg.stft.window_length];
                let prev = (t > 0).then(|| columns[t - 1].as_slice());
                let shape = spectral_shape(&columns[t], prev, frame, cfg);
                let harm = harmonic_features(frame, &columns[t], cfg);
                let mut row = [0.0; N_FRAME_FEATURES];
                row[..N_SPECTRAL].copy_from_slice(&shape);
                row[N_SPECTRAL..N_SPECTRAL + N_MFCC].copy_from_slice(&mfccs[t]);
                row[N_SPECTRAL + N_MFCC..N_SPECTRAL + 2 * N_MFCC].copy_from_slice(&deltas[t]);
                row[N_SPECTRAL + 2 * N_MFCC..].copy_from_slice(&harm);
                row
            })
            .collect()
    }

    /// Full path for one event: pad/truncate, STFT, frame features, statistics.
    pub fn extract(&self, event_samples: &[f64], label: EventClass, duration: f64) -> Result<EventFeatureVector> {
        let segment = dsp::prepare_segment(event_samples)?;
        let spec = dsp::stft_magnitude(&segment, &self.cfg.stft)?;
        let rows = self.frame_rows(&spec, &segment);
        let mut v = aggregate_event_features(&rows)?;
        v.label = label;
        v.duration = duration;
        if let Some(i) = v.values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Internal(format!("non-finite feature {}", event_feature_names()[i])));
        }
        Ok(v)
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Mean, sample standard deviation, median, min and max of every feature
/// over the 59 frames.
pub fn aggregate_event_features(rows: &[FrameFeatureRow]) -> Result<EventFeatureVector> {
    if rows.len() != N_FRAMES {
        return Err(Error::Argument(format!("expected {N_FRAMES} frame rows, got {}", rows.len())));
    }
    let n = rows.len() as f64;
    let mut values = Vec::with_capacity(N_EVENT_FEATURES);
    let mut track = vec![0.0; rows.len()];
    for j in 0..N_FRAME_FEATURES {
        for (slot, row) in track.iter_mut().zip(rows) {
            *slot = row[j];
        }
        let mean = track.iter().sum::<f64>() / n;
        let var = track.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        track.sort_by(f64::total_cmp);
        let (min, max) = (track[0], track[track.len() - 1]);
        // the running sum can land a few ulps outside [min, max]
        values.extend_from_slice(&[mean.clamp(min, max), var.sqrt(), median_sorted(&track), min, max]);
    }
    Ok(EventFeatureVector {
        values,
        label: EventClass::Random,
        duration: 0.0,
    })
}

/// Header: 235 feature columns, then `label`, then `duration`.
pub fn feature_csv_header() -> Vec<String> {
    let mut h = event_feature_names();
    h.push("label".into());
    h.push("duration".into());
    h
}

pub fn write_feature_csv<W: Write>(out: W, rows: &[EventFeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(feature_csv_header())?;
    for r in rows {
        let mut rec: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        rec.push(r.label.as_str().to_string());
        rec.push(r.duration.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<EventFeatureVector>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() != N_EVENT_FEATURES + 2 {
        return Err(Error::Format(format!(
            "feature csv has {} columns, expected {}",
            header.len(),
            N_EVENT_FEATURES + 2
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {s:?}"),
            })
        };
        let values = rec.iter().take(N_EVENT_FEATURES).map(num).collect::<Result<Vec<_>>>()?;
        let label = match &rec[N_EVENT_FEATURES] {
            "wheeze" => EventClass::Wheeze,
            "random" => EventClass::Random,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown label {other:?}"),
                })
            }
        };
        let duration = num(&rec[N_EVENT_FEATURES + 1])?;
        out.push(EventFeatureVector { values, label, duration });
    }
    Ok(out)
}
