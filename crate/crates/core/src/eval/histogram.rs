use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledEvent;
use crate::error::{Error, Result};

pub const HIST_START_S: f64 = 0.1;
/// Durations at or beyond this share the terminal bin.
pub const HIST_MAX_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationHistogram {
    pub bin_width: f64,
    /// Lower edge of every bin; the last bin is open-ended.
    pub bin_starts: Vec<f64>,
    pub wheeze_counts: Vec<u64>,
    pub fn_counts: Vec<u64>,
}

impl DurationHistogram {
    pub fn empty(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width <= HIST_MAX_S - HIST_START_S) {
            return Err(Error::Argument(format!("bin width must lie in (0, 1.9], got {bin_width}")));
        }
        let regular = ((HIST_MAX_S - HIST_START_S) / bin_width - 1e-9).ceil() as usize;
        let bin_starts: Vec<f64> = (0..=regular).map(|i| HIST_START_S + i as f64 * bin_width).collect();
        let n = bin_starts.len();
        Ok(DurationHistogram {
            bin_width,
            bin_starts,
            wheeze_counts: vec![0; n],
            fn_counts: vec![0; n],
        })
    }

    /// Durations below the first edge go to the first bin, long ones to the
    /// terminal bin.
    pub fn bin_of(&self, duration: f64) -> usize {
        let last = self.bin_starts.len() - 1;
        if duration >= HIST_MAX_S {
            return last;
        }
        let i = ((duration - HIST_START_S) / self.bin_width + 1e-9).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(last - 1)
        }
    }

    pub fn bin_end(&self, i: usize) -> f64 {
        self.bin_starts[i] + self.bin_width
    }

    pub fn fn_total(&self) -> u64 {
        self.fn_counts.iter().sum()
    }

    /// Share of false negatives in bins that end at or below `limit_s`.
    pub fn fn_share_below(&self, limit_s: f64) -> f64 {
        let total = self.fn_total();
        if total == 0 {
            return 0.0;
        }
        let below: u64 = (0..self.bin_starts.len())
            .filter(|&i| self.bin_end(i) <= limit_s + 1e-9)
            .map(|i| self.fn_counts[i])
            .sum();
        below as f64 / total as f64
    }

    pub fn occupied_fn_bins(&self) -> usize {
        self.fn_counts.iter().filter(|&&c| c > 0).count()
    }
}

fn event_key(e: &LabeledEvent) -> (String, u64, u64) {
    (e.recording_id.clone(), e.start.to_bits(), e.end.to_bits())
}

/// Paired histograms of all annotated wheeze durations and of the wheezes a
/// model missed.
pub fn fn_duration_histogram(fn_events: &[LabeledEvent], all_wheezes: &[LabeledEvent], bin_width: f64) -> Result<DurationHistogram> {
    let mut h = DurationHistogram::empty(bin_width)?;
    let mut available: HashMap<(String, u64, u64), usize> = HashMap::new();
    for w in all_wheezes {
        let b = h.bin_of(w.duration());
        h.wheeze_counts[b] += 1;
        *available.entry(event_key(w)).or_default() += 1;
    }
    for e in fn_events {
        match available.get_mut(&event_key(e)) {
            Some(n) if *n > 0 => *n -= 1,
            _ => {
                return Err(Error::Argument(format!(
                    "false negative {}@{}-{} is not among the wheezes",
                    e.recording_id, e.start, e.end
                )))
            }
        }
        let b = h.bin_of(e.duration());
        h.fn_counts[b] += 1;
    }
    Ok(h)
}
