//! Fixed-size magnitude spectrograms of event segments.

use std::cell::RefCell;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// 2 s at 4 kHz.
pub const SEGMENT_LEN: usize = 8000;
pub const N_BINS: usize = 257;
pub const N_FRAMES: usize = 59;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl Default for StftConfig {
    /// 128 ms Hamming window, 75 % overlap, at 4 kHz.
    fn default() -> Self {
        StftConfig {
            window_length: 512,
            hop: 128,
            fft_size: 512,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.hop == 0 {
            return Err(Error::Argument("window and hop must be positive".into()));
        }
        if self.fft_size < self.window_length {
            return Err(Error::Argument(format!(
                "fft size {} shorter than window {}",
                self.fft_size, self.window_length
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window_length {
            0
        } else {
            (len - self.window_length) / self.hop + 1
        }
    }

    /// Symmetric Hamming window.
    pub fn window(&self) -> Vec<f64> {
        let n = self.window_length;
        if n == 1 {
            return vec![1.0];
        }
        (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect()
    }
}

/// Frequency-by-time matrix, stored row-major (`rows` frequency bins).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Spectrogram {
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Argument(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        Ok(Spectrogram { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Spectrogram {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Magnitudes of one frame across all bins.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Centers short segments in zeros (extra zero on the right for odd
/// deficits); keeps the first 8000 samples of long ones.
pub fn prepare_segment(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("event segment has no samples".into()));
    }
    if samples.len() >= SEGMENT_LEN {
        return Ok(samples[..SEGMENT_LEN].to_vec());
    }
    let deficit = SEGMENT_LEN - samples.len();
    let left = deficit / 2;
    let mut out = vec![0.0; SEGMENT_LEN];
    out[left..left + samples.len()].copy_from_slice(samples);
    Ok(out)
}

/// Fraction of the prepared 2 s segment that is padding.
pub fn padding_fraction(segment_len: usize) -> f64 {
    1.0 - segment_len.min(SEGMENT_LEN) as f64 / SEGMENT_LEN as f64
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_for(size: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(size))
}

/// Magnitude STFT of any signal at least one window long.
pub fn stft(samples: &[f64], cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let frames = cfg.n_frames(samples.len());
    if frames == 0 {
        return Err(Error::Argument(format!(
            "signal of {} samples shorter than window {}",
            samples.len(),
            cfg.window_length
        )));
    }
    let bins = cfg.n_bins();
    let window = cfg.window();
    let fft = fft_for(cfg.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut values = vec![0.0; bins * frames];
    for t in 0..frames {
        let frame = &samples[t * cfg.hop..t * cfg.hop + cfg.window_length];
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (slot, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (f, c) in buf.iter().take(bins).enumerate() {
            values[f * frames + t] = c.norm();
        }
    }
    Spectrogram::from_values(bins, frames, values)
}

/// The 257x59 magnitude spectrogram of a prepared 8000-sample segment.
pub fn stft_magnitude(segment: &[f64], cfg: &StftConfig) -> Result<Spectrogram> {
    if segment.len() != SEGMENT_LEN {
        return Err(Error::Argument(format!(
            "segment must have {SEGMENT_LEN} samples, got {}",
            segment.len()
        )));
    }
    stft(segment, cfg)
}

/// Min-max scaling to [0, 1]; a constant matrix maps to zeros.
pub fn normalize01(spec: &Spectrogram) -> Spectrogram {
    let (lo, hi) = spec.min_max();
    let range = hi - lo;
    let values = if range > 0.0 && range.is_finite() {
        spec.values.iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.0; spec.values.len()]
    };
    Spectrogram {
        rows: spec.rows,
        cols: spec.cols,
        values,
    }
}

/// Header tag of the binary matrix dump.
pub const SPECTROGRAM_MAGIC: &[u8; 8] = b"WHZSPEC1";

/// Appends one matrix record: magic, u32 rows, u32 cols, f32 LE row-major.
pub fn write_spectrogram<W: Write>(mut out: W, spec: &Spectrogram) -> std::io::Result<()> {
    out.write_all(SPECTROGRAM_MAGIC)?;
    out.write_all(&(spec.rows as u32).to_le_bytes())?;
    out.write_all(&(spec.cols as u32).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(spec.values.len() * 4);
    for &v in &spec.values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&bytes)
}

/// Reads one record, or `None` at a clean end of stream.
pub fn read_spectrogram<R: Read>(mut input: R) -> Result<Option<Spectrogram>> {
    let mut magic = [0u8; 8];
    let mut filled = 0;
    while filled < magic.len() {
        let n = input.read(&mut magic[filled..]).map_err(|e| Error::io("<spectrogram>", e))?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    if filled == 0 {
        return Ok(None);
    }
    if filled < magic.len() || &magic != SPECTROGRAM_MAGIC {
        return Err(Error::Format("bad spectrogram magic".into()));
    }
    let mut dims = [0u8; 8];
    input
        .read_exact(&mut dims)
        .map_err(|_| Error::Format("truncated spectrogram header".into()))?;
    let rows = u32::from_le_bytes(dims[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(dims[4..8].try_into().unwrap()) as usize;
    let mut raw = vec![0u8; rows * cols * 4];
    input
        .read_exact(&mut raw)
        .map_err(|_| Error::Format("truncated spectrogram body".into()))?;
    let values = raw
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Spectrogram::from_values(rows, cols, values).map(Some)
}

/// Reads every record of a multi-record file.
pub fn read_spectrograms<R: Read>(mut input: R) -> Result<Vec<Spectrogram>> {
    let mut out = Vec::new();
    while let Some(s) = read_spectrogram(&mut input)? {
        out.push(s);
    }
    Ok(out)
}

/// One CSV line per frequency bin.
pub fn spectrogram_csv(spec: &Spectrogram) -> String {
    let mut s = String::new();
    for r in 0..spec.rows {
        let row: Vec<String> = (0..spec.cols).map(|c| spec.get(r, c).to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
