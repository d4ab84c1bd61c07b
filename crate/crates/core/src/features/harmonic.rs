//! Pitch, voicing, inharmonicity and chroma descriptors.

use super::spectral::spectral_peaks;
use super::FeatureConfig;

/// chroma_centroid, chroma_peak, pitch, voicing, inharmonicity.
pub const N_HARMONIC: usize = 5;

/// Pitch class with C = 0 (so A4 = 440 Hz is 9).
pub fn pitch_class(freq: f64) -> usize {
    let semitones_from_a = (12.0 * (freq / 440.0).log2()).round() as i64;
    (semitones_from_a + 9).rem_euclid(12) as usize
}

/// Autocorrelation-based pitch estimate. Returns (pitch Hz, peak strength).
pub fn estimate_pitch(frame: &[f64], cfg: &FeatureConfig) -> (f64, f64) {
    let r0: f64 = frame.iter().map(|x| x * x).sum();
    if r0 <= 0.0 {
        return (0.0, 0.0);
    }
    let min_lag = (cfg.sample_rate / cfg.pitch_max_hz).ceil().max(1.0) as usize;
    let max_lag = ((cfg.sample_rate / cfg.pitch_min_hz).floor() as usize).min(frame.len() - 1);
    if min_lag >= max_lag {
        return (0.0, 0.0);
    }
    let acf = |lag: usize| -> f64 {
        frame[..frame.len() - lag]
            .iter()
            .zip(&frame[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / r0
    };
    let values: Vec<f64> = (min_lag - 1..=max_lag + 1)
        .map(|l| if l < frame.len() { acf(l) } else { 0.0 })
        .collect();
    // values[j] holds lag min_lag - 1 + j
    let (best_j, best) = (1..values.len() - 1)
        .map(|j| (j, values[j]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let lag = (min_lag - 1 + best_j) as f64;
    let (l, c, r) = (values[best_j - 1], best, values[best_j + 1]);
    let denom = l - 2.0 * c + r;
    let offset = if c >= l && c >= r && denom < 0.0 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    (cfg.sample_rate / (lag + offset), best.clamp(0.0, 1.0))
}

pub fn harmonic_features(frame_samples: &[f64], frame_mag: &[f64], cfg: &FeatureConfig) -> [f64; N_HARMONIC] {
    let bin_hz = cfg.bin_hz();
    let (pitch, voicing) = estimate_pitch(frame_samples, cfg);

    let mut chroma = [0.0f64; 12];
    for (i, m) in frame_mag.iter().enumerate() {
        let f = i as f64 * bin_hz;
        if f >= cfg.pitch_min_hz {
            chroma[pitch_class(f)] += m * m;
        }
    }
    let chroma_total: f64 = chroma.iter().sum();
    let (chroma_centroid, chroma_peak) = if chroma_total > 0.0 {
        let (sx, sy) = chroma.iter().enumerate().fold((0.0, 0.0), |(sx, sy), (c, e)| {
            let th = 2.0 * std::f64::consts::PI * c as f64 / 12.0;
            (sx + e * th.cos(), sy + e * th.sin())
        });
        let centroid = if sx.hypot(sy) > 1e-12 * chroma_total {
            (sy.atan2(sx) / (2.0 * std::f64::consts::PI) * 12.0).rem_euclid(12.0)
        } else {
            0.0
        };
        let peak = chroma
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c as f64)
            .unwrap_or(0.0);
        (centroid, peak)
    } else {
        (0.0, 0.0)
    };

    let inharmonicity = if voicing >= cfg.voicing_threshold && pitch > 0.0 {
        let peaks = spectral_peaks(frame_mag, cfg.peak_threshold);
        let (num, den) = peaks
            .iter()
            .map(|&i| (i as f64 * bin_hz, frame_mag[i] * frame_mag[i]))
            .filter(|&(f, _)| f > 0.0 && f <= cfg.sample_rate / 2.0)
            .fold((0.0, 0.0), |(num, den), (f, e)| {
                let n = (f / pitch).round().max(1.0);
                (num + e * (f / (n * pitch) - 1.0).abs(), den + e)
            });
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    } else {
        0.0
    };

    [chroma_centroid, chroma_peak, pitch, voicing, inharmonicity]
}
