//! Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel.

use super::AudioRecording;
use crate::error::{Error, Result};

/// Passband edge as a fraction of the lower of the two rates.
pub const CUTOFF_FRACTION: f64 = 0.45;
const ZERO_CROSSINGS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;
/// Above this many phases the kernel is evaluated per output sample.
const MAX_PHASE_TABLE: u64 = 1024;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    /// cutoff in cycles per input sample
    fc: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(input_rate: f64, target_rate: f64) -> Self {
        let cutoff_hz = CUTOFF_FRACTION * input_rate.min(target_rate);
        let fc = cutoff_hz / input_rate;
        Kernel {
            fc,
            half_width: ZERO_CROSSINGS / (2.0 * fc),
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    fn eval(&self, tau: f64) -> f64 {
        let r = tau / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let arg = 2.0 * self.fc * tau;
        let sinc = if arg.abs() < 1e-12 {
            1.0
        } else {
            (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
        };
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        2.0 * self.fc * sinc * window
    }

    /// Taps for the input samples around fractional position `frac`
    /// (relative to the integer base index), normalized to unit DC gain.
    fn taps(&self, frac: f64) -> (i64, Vec<f64>) {
        let lo = (frac - self.half_width).ceil() as i64;
        let hi = (frac + self.half_width).floor() as i64;
        let mut taps: Vec<f64> = (lo..=hi).map(|i| self.eval(frac - i as f64)).collect();
        let sum: f64 = taps.iter().sum();
        if sum.abs() > 0.0 {
            taps.iter_mut().for_each(|t| *t /= sum);
        }
        (lo, taps)
    }
}

fn apply(samples: &[f64], base: i64, lo: i64, taps: &[f64]) -> f64 {
    let n = samples.len() as i64;
    let start = base + lo;
    taps.iter()
        .enumerate()
        .filter_map(|(k, &t)| {
            let idx = start + k as i64;
            (0..n).contains(&idx).then(|| t * samples[idx as usize])
        })
        .sum()
}

/// Converts `rec` to `target_rate` Hz.
///
/// Output length is `round(len * target / source)`. Equal rates return the
/// input unchanged.
pub fn resample(rec: &AudioRecording, target_rate: i64) -> Result<AudioRecording> {
    if target_rate <= 0 {
        return Err(Error::Argument(format!("target rate must be positive, got {target_rate}")));
    }
    let target = target_rate as u64;
    let source = u64::from(rec.sample_rate);
    if source == target {
        return Ok(rec.clone());
    }

    let g = gcd(source, target);
    let up = target / g; // output samples per `down` input samples
    let down = source / g;
    let n_in = rec.samples.len() as u64;
    let n_out = ((n_in as f64) * (target as f64) / (source as f64)).round() as u64;
    let kernel = Kernel::new(source as f64, target as f64);

    // output j sits at input position j*down/up = base + phase/up
    let samples = if up <= MAX_PHASE_TABLE {
        let table: Vec<(i64, Vec<f64>)> = (0..up).map(|phase| kernel.taps(phase as f64 / up as f64)).collect();
        (0..n_out)
            .map(|j| {
                let num = j * down;
                let base = (num / up) as i64;
                let (lo, taps) = &table[(num % up) as usize];
                apply(&rec.samples, base, *lo, taps)
            })
            .collect()
    } else {
        (0..n_out)
            .map(|j| {
                let num = j * down;
                let base = (num / up) as i64;
                let (lo, taps) = kernel.taps((num % up) as f64 / up as f64);
                apply(&rec.samples, base, lo, &taps)
            })
            .collect()
    };

    AudioRecording::new(&rec.id, samples, target as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft_magnitude, StftConfig};

    fn sine(freq: f64, rate: u32, seconds: f64) -> AudioRecording {
        let n = (rate as f64 * seconds) as usize;
        let x = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioRecording::new("sine", x, rate).unwrap()
    }

    #[test]
    fn identity_at_same_rate() {
        let rec = sine(300.0, 4000, 0.5);
        let out = resample(&rec, 4000).unwrap();
        assert_eq!(out.samples, rec.samples);
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let rec = sine(300.0, 4000, 0.1);
        assert!(matches!(resample(&rec, 0), Err(Error::Argument(_))));
        assert!(matches!(resample(&rec, -4000), Err(Error::Argument(_))));
    }

    #[test]
    fn cd_rate_to_4k_keeps_length_and_pitch() {
        let rec = sine(440.0, 44100, 2.0);
        let out = resample(&rec, 4000).unwrap();
        assert!((out.samples.len() as i64 - 8000).abs() <= 1);
        assert_eq!(out.sample_rate, 4000);
        assert!((out.duration() - rec.duration()).abs() <= 1.0 / 4000.0);

        let spec = stft_magnitude(&out.samples[..8000], &StftConfig::default()).unwrap();
        let bin_hz = 4000.0 / 512.0;
        let mut power = vec![0.0; spec.rows()];
        for (f, p) in power.iter_mut().enumerate() {
            *p = (0..spec.cols()).map(|t| spec.get(f, t)).sum();
        }
        let peak = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((peak as f64 * bin_hz - 440.0).abs() <= bin_hz);
    }

    #[test]
    fn removes_content_above_new_nyquist() {
        // 3 kHz is above the 2 kHz Nyquist of the target; it must not alias to 1 kHz
        let rec = sine(3000.0, 44100, 1.0);
        let out = resample(&rec, 4000).unwrap();
        let interior = &out.samples[200..out.samples.len() - 200];
        let rms = (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(rms < 1e-3, "aliased rms {rms}");
    }

    #[test]
    fn passband_gain_near_unity() {
        let rec = sine(500.0, 10000, 1.0);
        let out = resample(&rec, 4000).unwrap();
        let interior = &out.samples[400..out.samples.len() - 400];
        let peak = interior.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 5e-3, "peak {peak}");
    }

    #[test]
    fn upsampling_preserves_tone() {
        let rec = sine(200.0, 4000, 0.5);
        let out = resample(&rec, 10000).unwrap();
        assert_eq!(out.samples.len(), 5000);
        let expect: Vec<f64> = (0..5000)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 10000.0).sin())
            .collect();
        let err = out.samples[500..4500]
            .iter()
            .zip(&expect[500..4500])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 5e-3, "max err {err}");
    }

    #[test]
    fn idempotent_at_target_rate() {
        let rec = sine(700.0, 44100, 0.3);
        let once = resample(&rec, 4000).unwrap();
        let twice = resample(&once, 4000).unwrap();
        assert_eq!(once.samples, twice.samples);
    }

    #[test]
    fn bessel_reference() {
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-14);
    }
}
