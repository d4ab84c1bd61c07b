//! Seeded generation of random (non-wheeze) events.
//!
//! Two duration modes share one placement procedure: `Fd` uses a constant
//! 150 ms, `Vd` draws from a Burr distribution truncated to [0.1, 2] s.
//! Window choice and duration draws come from separate RNG streams so both
//! modes pick the same windows for a given recording.

mod burr;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EventClass, LabeledEvent, Provenance};
use crate::error::{Error, Result};
use crate::rng::{recording_seed, rng_from_seed, PipelineRng};

pub use burr::BurrParams;

/// Random events per annotated wheeze. Together with the one-per-window cap
/// this lands the corpus near the 40/60 wheeze/random balance.
pub const EVENTS_PER_WHEEZE: f64 = 1.534;
/// Placement tries per recording before giving up on the remaining events.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Rejection-sampling cap for a single truncated duration draw.
pub const MAX_DURATION_DRAWS: usize = 1_000_000;

const STREAM_WINDOWS: u64 = 1;
const STREAM_DURATIONS: u64 = 2;
const STREAM_STARTS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventMode {
    #[serde(rename = "FD")]
    Fd,
    #[serde(rename = "VD")]
    Vd,
}

impl EventMode {
    pub const ALL: [EventMode; 2] = [EventMode::Fd, EventMode::Vd];

    pub fn as_str(self) -> &'static str {
        match self {
            EventMode::Fd => "FD",
            EventMode::Vd => "VD",
        }
    }

    pub fn tag(self) -> u64 {
        match self {
            EventMode::Fd => 0xFD,
            EventMode::Vd => 0x7D,
        }
    }
}

impl fmt::Display for EventMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FD" => Ok(EventMode::Fd),
            "VD" => Ok(EventMode::Vd),
            _ => Err(Error::Argument(format!("unknown event mode {s:?} (expected FD or VD)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub mode: EventMode,
    pub fd_duration: f64,
    pub vd_min: f64,
    pub vd_max: f64,
    pub spacing_window: f64,
    pub base_seed: u64,
    pub burr: BurrParams,
}

impl GenerationConfig {
    pub fn new(mode: EventMode, base_seed: u64) -> Self {
        GenerationConfig {
            mode,
            fd_duration: 0.150,
            vd_min: 0.100,
            vd_max: 2.0,
            spacing_window: 5.0,
            base_seed,
            burr: BurrParams::WHEEZE_DURATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.burr.validate()?;
        if !(self.vd_min > 0.0 && self.vd_min < self.vd_max) {
            return Err(Error::Argument(format!(
                "need 0 < vd_min < vd_max, got [{}, {}]",
                self.vd_min, self.vd_max
            )));
        }
        if !(self.fd_duration >= self.vd_min && self.fd_duration <= self.vd_max) {
            return Err(Error::Argument(format!(
                "fd_duration {} outside [{}, {}]",
                self.fd_duration, self.vd_min, self.vd_max
            )));
        }
        if !(self.spacing_window > 0.0) {
            return Err(Error::Argument("spacing_window must be positive".into()));
        }
        Ok(())
    }

    /// Analytic CDF of the truncated duration distribution.
    pub fn truncated_cdf(&self, x: f64) -> f64 {
        let lo = self.burr.cdf(self.vd_min);
        let hi = self.burr.cdf(self.vd_max);
        ((self.burr.cdf(x) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

/// Draws one event duration in seconds.
pub fn sample_duration<R: Rng + ?Sized>(rng: &mut R, cfg: &GenerationConfig) -> Result<f64> {
    match cfg.mode {
        EventMode::Fd => Ok(cfg.fd_duration),
        EventMode::Vd => {
            for _ in 0..MAX_DURATION_DRAWS {
                let q: f64 = rng.gen();
                let d = cfg.burr.inverse_cdf(q)?;
                if (cfg.vd_min..=cfg.vd_max).contains(&d) {
                    return Ok(d);
                }
            }
            Err(Error::Internal(format!(
                "no duration inside [{}, {}] after {MAX_DURATION_DRAWS} draws",
                cfg.vd_min, cfg.vd_max
            )))
        }
    }
}

/// Number of random events for a recording: one per full spacing window at
/// most, and about 1.534 per annotated wheeze.
pub fn planned_event_count(duration: f64, n_wheezes: usize, spacing_window: f64) -> usize {
    if n_wheezes == 0 {
        return 0;
    }
    let windows = (duration / spacing_window).floor() as usize;
    let proportional = (EVENTS_PER_WHEEZE * n_wheezes as f64).round() as usize;
    windows.min(proportional)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementWarning {
    pub recording_id: String,
    pub requested: usize,
    pub placed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedEvents {
    pub events: Vec<LabeledEvent>,
    /// Index of the spacing window each event starts in.
    pub windows: Vec<usize>,
    pub seed: u64,
    pub planned: usize,
    pub warning: Option<PlacementWarning>,
}

fn stream(seed: u64, id: u64) -> PipelineRng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(id);
    rng
}

/// Start positions in `[lo, hi]` for an event of length `d` that avoid every
/// interval in `blocked`, as a sorted list of disjoint ranges.
fn feasible_starts(lo: f64, hi: f64, d: f64, blocked: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut free = vec![(lo, hi)];
    for &(bs, be) in blocked {
        // starts in (bs - d, be) overlap the blocked interval
        let (cut_lo, cut_hi) = (bs - d, be);
        free = free
            .into_iter()
            .flat_map(|(a, b)| {
                let mut parts = Vec::with_capacity(2);
                if cut_hi <= a || cut_lo >= b {
                    parts.push((a, b));
                } else {
                    if cut_lo > a {
                        parts.push((a, cut_lo));
                    }
                    if cut_hi < b {
                        parts.push((cut_hi, b));
                    }
                }
                parts
            })
            .collect();
    }
    free.retain(|&(a, b)| b >= a);
    free
}

fn pick_start<R: Rng + ?Sized>(rng: &mut R, free: &[(f64, f64)]) -> Option<f64> {
    let total: f64 = free.iter().map(|(a, b)| b - a).sum();
    if free.is_empty() {
        return None;
    }
    if total <= 0.0 {
        return Some(free[0].0);
    }
    let mut u = rng.gen::<f64>() * total;
    for &(a, b) in free {
        if u <= b - a {
            return Some(a + u);
        }
        u -= b - a;
    }
    free.last().map(|&(_, b)| b)
}

/// Places random events in one recording.
///
/// Windows are chosen uniformly without replacement; each chosen window gets
/// one event whose start lies in that window, which fits in the recording and
/// overlaps neither an annotated wheeze nor another generated event.
pub fn generate_events(recording_id: &str, duration: f64, wheezes: &[LabeledEvent], cfg: &GenerationConfig) -> Result<GeneratedEvents> {
    cfg.validate()?;
    if !(duration > 0.0) {
        return Err(Error::Argument(format!("{recording_id}: duration must be positive")));
    }
    if let Some(w) = wheezes.iter().find(|w| w.recording_id != recording_id) {
        return Err(Error::Argument(format!(
            "wheeze from {} passed for recording {recording_id}",
            w.recording_id
        )));
    }

    let seed = recording_seed(cfg.base_seed, recording_id);
    let n_windows = (duration / cfg.spacing_window).floor() as usize;
    let planned = planned_event_count(duration, wheezes.len(), cfg.spacing_window);
    log::debug!(
        "{recording_id}: {planned} events = min({n_windows} windows, round({EVENTS_PER_WHEEZE} x {} wheezes))",
        wheezes.len()
    );

    let mut window_rng = stream(seed, STREAM_WINDOWS);
    let mut duration_rng = stream(seed, STREAM_DURATIONS);
    let mut start_rng = stream(seed, STREAM_STARTS);

    let mut chosen: Vec<usize> = if planned == 0 {
        Vec::new()
    } else {
        sample_indices(&mut window_rng, n_windows, planned).into_vec()
    };
    chosen.sort_unstable();

    let mut blocked: Vec<(f64, f64)> = wheezes.iter().map(|w| (w.start, w.end)).collect();
    let mut events = Vec::with_capacity(planned);
    let mut windows = Vec::with_capacity(planned);
    let mut attempts = 0;

    'windows: for &win in &chosen {
        let win_start = win as f64 * cfg.spacing_window;
        let win_end = win_start + cfg.spacing_window;
        loop {
            if attempts >= MAX_PLACEMENT_ATTEMPTS {
                break 'windows;
            }
            attempts += 1;
            let d = sample_duration(&mut duration_rng, cfg)?;
            let hi = (duration - d).min(win_end);
            if hi >= win_start {
                let free = feasible_starts(win_start, hi, d, &blocked);
                if let Some(start) = pick_start(&mut start_rng, &free) {
                    // start == win_end belongs to the next window
                    if start < win_end {
                        let end = start + d;
                        blocked.push((start, end));
                        events.push(LabeledEvent {
                            recording_id: recording_id.to_string(),
                            start,
                            end,
                            class: EventClass::Random,
                            provenance: Provenance::Generated,
                        });
                        windows.push(win);
                        continue 'windows;
                    }
                }
            }
            if cfg.mode == EventMode::Fd {
                // a fixed duration that does not fit now never will
                continue 'windows;
            }
        }
    }

    let warning = (events.len() < planned).then(|| {
        log::warn!(
            "{recording_id}: placed {} of {planned} random events (recording too crowded)",
            events.len()
        );
        PlacementWarning {
            recording_id: recording_id.to_string(),
            requested: planned,
            placed: events.len(),
        }
    });

    Ok(GeneratedEvents {
        events,
        windows,
        seed,
        planned,
        warning,
    })
}

/// One row of the event-list CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub recording_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub class: EventClass,
    pub provenance: Provenance,
    pub mode: EventMode,
    pub seed: u64,
}

impl EventRecord {
    pub fn from_event(ev: &LabeledEvent, mode: EventMode, seed: u64) -> Self {
        EventRecord {
            recording_id: ev.recording_id.clone(),
            start_s: ev.start,
            end_s: ev.end,
            class: ev.class,
            provenance: ev.provenance,
            mode,
            seed,
        }
    }

    pub fn to_event(&self) -> LabeledEvent {
        LabeledEvent {
            recording_id: self.recording_id.clone(),
            start: self.start_s,
            end: self.end_s,
            class: self.class,
            provenance: self.provenance,
        }
    }
}

pub fn write_event_csv<W: Write>(out: W, records: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<event csv>", e))?;
    Ok(())
}

pub fn read_event_csv<R: Read>(input: R) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
