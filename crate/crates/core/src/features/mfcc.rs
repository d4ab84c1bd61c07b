use super::FeatureConfig;

pub const N_MFCC: usize = 13;
pub const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `bands x n_bins`, spanning 0 Hz to `max_hz`.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(bands: usize, n_bins: usize, bin_hz: f64, max_hz: f64) -> Self {
        let top = hz_to_mel(max_hz);
        let edges: Vec<f64> = (0..bands + 2).map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64)).collect();
        let weights = (0..bands)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                (0..n_bins)
                    .map(|i| {
                        let f = i as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    })
                    .collect()
            })
            .collect();
        MelFilterbank { weights }
    }

    pub fn bands(&self) -> usize {
        self.weights.len()
    }

    /// Band energies of a power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Orthonormal DCT-II.
pub fn dct2_orthonormal(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// 13 cepstral coefficients of one magnitude frame. With `include_c0` the
/// energy term is the first of the 13; otherwise coefficients 1..=13.
pub fn mfcc13(frame_mag: &[f64], bank: &MelFilterbank, cfg: &FeatureConfig) -> [f64; N_MFCC] {
    let power: Vec<f64> = frame_mag.iter().map(|m| m * m).collect();
    let log_bands: Vec<f64> = bank.apply(&power).into_iter().map(|e| e.max(LOG_FLOOR).ln()).collect();
    let cep = dct2_orthonormal(&log_bands);
    let first = usize::from(!cfg.include_c0);
    let mut out = [0.0; N_MFCC];
    out.copy_from_slice(&cep[first..first + N_MFCC]);
    out
}

/// First difference along time; the first frame's delta is zero.
pub fn delta_mfcc(track: &[[f64; N_MFCC]]) -> Vec<[f64; N_MFCC]> {
    let mut out = vec![[0.0; N_MFCC]; track.len()];
    for t in 1..track.len() {
        for k in 0..N_MFCC {
            out[t][k] = track[t][k] - track[t - 1][k];
        }
    }
    out
}
