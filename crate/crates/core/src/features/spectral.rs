//! Spectral shape descriptors of a single frame.

use super::FeatureConfig;

pub const BRIGHTNESS_CUTOFFS_HZ: [f64; 4] = [100.0, 200.0, 400.0, 800.0];
pub const ROLLOFF_PERCENTS: [f64; 4] = [95.0, 75.0, 25.0, 5.0];

/// Values in feature order: centroid, spread, zcr, entropy, flatness,
/// roughness, irregularity, flux, brightness x4, rolloff x4.
pub const N_SPECTRAL: usize = 16;

/// Sign changes per second, ignoring exact zeros.
pub fn zero_crossing_rate(samples: &[f64], sample_rate: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut last = 0i8;
    let mut changes = 0usize;
    for &x in samples {
        let s = if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                changes += 1;
            }
            last = s;
        }
    }
    changes as f64 * sample_rate / samples.len() as f64
}

/// Indices of local maxima at least `threshold` times the largest bin.
pub fn spectral_peaks(mag: &[f64], threshold: f64) -> Vec<usize> {
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = threshold * max;
    (0..mag.len())
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { mag[i - 1] };
            let right = if i + 1 == mag.len() { f64::NEG_INFINITY } else { mag[i + 1] };
            mag[i] >= floor && mag[i] > left && mag[i] >= right
        })
        .collect()
}

/// Plomp-Levelt dissonance summed over all peak pairs (Sethares' fit).
pub fn roughness(mag: &[f64], bin_hz: f64, threshold: f64) -> f64 {
    const B1: f64 = 3.5;
    const B2: f64 = 5.75;
    let peaks = spectral_peaks(mag, threshold);
    let mut total = 0.0;
    for (n, &i) in peaks.iter().enumerate() {
        for &j in &peaks[n + 1..] {
            let (fi, fj) = (i as f64 * bin_hz, j as f64 * bin_hz);
            let s = 0.24 / (0.021 * fi.min(fj) + 19.0);
            let df = (fj - fi).abs();
            total += mag[i] * mag[j] * ((-B1 * s * df).exp() - (-B2 * s * df).exp());
        }
    }
    total
}

pub fn spectral_shape(frame_mag: &[f64], prev_mag: Option<&[f64]>, frame_samples: &[f64], cfg: &FeatureConfig) -> [f64; N_SPECTRAL] {
    let bin_hz = cfg.bin_hz();
    let freq = |i: usize| i as f64 * bin_hz;
    let mut out = [0.0; N_SPECTRAL];

    out[2] = zero_crossing_rate(frame_samples, cfg.sample_rate);
    out[7] = match prev_mag {
        Some(prev) => frame_mag.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        None => 0.0,
    };

    let sum: f64 = frame_mag.iter().sum();
    let energy: f64 = frame_mag.iter().map(|m| m * m).sum();
    if sum <= 0.0 || energy <= 0.0 {
        return out;
    }

    let centroid = frame_mag.iter().enumerate().map(|(i, m)| freq(i) * m).sum::<f64>() / sum;
    let spread = (frame_mag
        .iter()
        .enumerate()
        .map(|(i, m)| (freq(i) - centroid).powi(2) * m)
        .sum::<f64>()
        / sum)
        .sqrt();
    out[0] = centroid;
    out[1] = spread;

    let n = frame_mag.len() as f64;
    out[3] = -frame_mag
        .iter()
        .map(|m| m * m / energy)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
        / n.ln();

    out[4] = if frame_mag.iter().any(|&m| m <= 0.0) {
        0.0
    } else {
        let log_mean = frame_mag.iter().map(|m| m.ln()).sum::<f64>() / n;
        (log_mean.exp() / (sum / n)).min(1.0)
    };

    out[5] = roughness(frame_mag, bin_hz, cfg.peak_threshold);
    out[6] = frame_mag.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum::<f64>() / energy;

    for (k, &cut) in BRIGHTNESS_CUTOFFS_HZ.iter().enumerate() {
        out[8 + k] = frame_mag
            .iter()
            .enumerate()
            .filter(|&(i, _)| freq(i) > cut)
            .map(|(_, m)| m * m)
            .sum::<f64>()
            / energy;
    }

    let mut cumulative = Vec::with_capacity(frame_mag.len());
    let mut acc = 0.0;
    for m in frame_mag {
        acc += m * m;
        cumulative.push(acc);
    }
    for (k, &pct) in ROLLOFF_PERCENTS.iter().enumerate() {
        let target = pct / 100.0 * acc;
        let idx = cumulative.iter().position(|&c| c >= target).unwrap_or(frame_mag.len() - 1);
        out[12 + k] = freq(idx);
    }
    out
}
