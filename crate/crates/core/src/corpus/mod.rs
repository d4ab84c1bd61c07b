//! Recordings, annotated events and the train/test split.

mod annotations;
mod resample;
mod wav;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotations::{parse_annotations, serialize_annotations};
pub use resample::{resample, CUTOFF_FRACTION};
pub use wav::{encode_wav, load_wav};

/// Rate every recording is converted to before analysis.
pub const ANALYSIS_RATE: u32 = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioRecording {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioRecording {
    pub fn new(id: &str, samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput(format!("{id}: recording has no samples")));
        }
        if sample_rate == 0 {
            return Err(Error::Argument(format!("{id}: sample rate must be positive")));
        }
        Ok(AudioRecording {
            id: id.to_string(),
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventClass {
    Wheeze,
    Random,
}

impl EventClass {
    /// Wheeze is the positive class.
    pub fn is_positive(self) -> bool {
        self == EventClass::Wheeze
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventClass::Wheeze => "wheeze",
            EventClass::Random => "random",
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Annotated,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEvent {
    pub recording_id: String,
    pub start: f64,
    pub end: f64,
    pub class: EventClass,
    pub provenance: Provenance,
}

impl LabeledEvent {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub train: Vec<LabeledEvent>,
    pub test: Vec<LabeledEvent>,
}

impl DatasetSplit {
    /// Checks that no recording contributes events to both sides.
    pub fn validate(&self) -> Result<()> {
        let train_ids: std::collections::HashSet<&str> = self.train.iter().map(|e| e.recording_id.as_str()).collect();
        if let Some(e) = self.test.iter().find(|e| train_ids.contains(e.recording_id.as_str())) {
            return Err(Error::Argument(format!(
                "recording {} appears in both train and test",
                e.recording_id
            )));
        }
        Ok(())
    }
}

fn to_index(t: f64, rate: u32) -> usize {
    // tolerate decimal seconds that land a hair below an integer sample index
    (t * f64::from(rate) + 1e-6).floor() as usize
}

/// Samples covered by `ev`: indices `floor(start*rate)..floor(end*rate)`.
pub fn slice_event<'a>(rec: &'a AudioRecording, ev: &LabeledEvent) -> Result<&'a [f64]> {
    let duration = rec.duration();
    if !(ev.start >= 0.0 && ev.start < ev.end && ev.end <= duration + 1e-9) {
        return Err(Error::Range(format!(
            "event [{}, {}] outside recording {} of {duration} s",
            ev.start, ev.end, rec.id
        )));
    }
    let lo = to_index(ev.start, rec.sample_rate);
    let hi = to_index(ev.end, rec.sample_rate).min(rec.samples.len());
    Ok(&rec.samples[lo..hi.max(lo)])
}

/// Clips events that run past the end of the recording; events starting at
/// or after the end are dropped. Both cases are logged.
pub fn clip_to_recording(events: Vec<LabeledEvent>, duration: f64) -> Vec<LabeledEvent> {
    events
        .into_iter()
        .filter_map(|mut e| {
            if e.start >= duration {
                log::warn!(
                    "{}: annotation [{}, {}] starts after recording end {duration}; dropped",
                    e.recording_id,
                    e.start,
                    e.end
                );
                return None;
            }
            if e.end > duration {
                log::warn!("{}: annotation end {} clipped to recording end {duration}", e.recording_id, e.end);
                e.end = duration;
            }
            Some(e)
        })
        .collect()
}

/// Reads the `recording_id {train|test}` manifest.
pub fn parse_split_manifest(text: &str) -> Result<BTreeMap<String, Split>> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, split] = fields[..] else {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected `recording_id split`, found {line:?}"),
            });
        };
        let split = match split.to_ascii_lowercase().as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("split must be train or test, found {other:?}"),
                })
            }
        };
        if out.insert(id.to_string(), split).is_some() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("recording {id} listed twice"),
            });
        }
    }
    Ok(out)
}

/// One recording's on-disk inputs.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub wav: PathBuf,
    pub annotations: PathBuf,
    pub split: Split,
}

/// Pairs every manifest entry with its `.wav` and `.txt` files. All missing
/// files are reported together.
pub fn scan_corpus(data_dir: &Path, manifest: &BTreeMap<String, Split>) -> Result<Vec<CorpusEntry>> {
    let mut missing = Vec::new();
    let mut entries = Vec::with_capacity(manifest.len());
    for (id, &split) in manifest {
        let wav = data_dir.join(format!("{id}.wav"));
        let annotations = data_dir.join(format!("{id}.txt"));
        for p in [&wav, &annotations] {
            if !p.is_file() {
                missing.push(p.clone());
            }
        }
        entries.push(CorpusEntry {
            id: id.clone(),
            wav,
            annotations,
            split,
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    Ok(entries)
}

/// A recording at the analysis rate with its annotated wheezes.
#[derive(Debug, Clone)]
pub struct LoadedRecording {
    pub recording: AudioRecording,
    pub wheezes: Vec<LabeledEvent>,
    pub split: Split,
}

/// Loads, resamples to 4 kHz and attaches clipped wheeze annotations.
pub fn load_entry(entry: &CorpusEntry) -> Result<LoadedRecording> {
    let raw = std::fs::read(&entry.wav).map_err(|e| Error::io(&entry.wav, e))?;
    let text = std::fs::read_to_string(&entry.annotations).map_err(|e| Error::io(&entry.annotations, e))?;
    let rec = load_wav(&entry.id, &raw)?;
    let rec = resample(&rec, i64::from(ANALYSIS_RATE))?;
    let wheezes = parse_annotations(&entry.id, &text)?;
    let wheezes = clip_to_recording(wheezes, rec.duration());
    Ok(LoadedRecording {
        recording: rec,
        wheezes,
        split: entry.split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> AudioRecording {
        AudioRecording::new("ramp", (0..n).map(|i| i as f64).collect(), 4000).unwrap()
    }

    fn ev(start: f64, end: f64) -> LabeledEvent {
        LabeledEvent {
            recording_id: "ramp".into(),
            start,
            end,
            class: EventClass::Wheeze,
            provenance: Provenance::Annotated,
        }
    }

    #[test]
    fn slice_whole_recording() {
        let rec = ramp(8000);
        assert_eq!(slice_event(&rec, &ev(0.0, 2.0)).unwrap().len(), 8000);
    }

    #[test]
    fn slice_half_second() {
        let rec = ramp(8000);
        assert_eq!(slice_event(&rec, &ev(1.0, 1.5)).unwrap().len(), 2000);
    }

    #[test]
    fn slice_matches_direct_indexing() {
        let rec = ramp(8000);
        let s = slice_event(&rec, &ev(0.25, 0.35)).unwrap();
        let expected: Vec<f64> = (1000..1400).map(|i| i as f64).collect();
        assert_eq!(s, &expected[..]);
    }

    #[test]
    fn slice_out_of_bounds() {
        let rec = ramp(8000);
        assert!(matches!(slice_event(&rec, &ev(1.5, 2.5)), Err(Error::Range(_))));
        assert!(matches!(slice_event(&rec, &ev(-0.1, 0.5)), Err(Error::Range(_))));
    }

    #[test]
    fn clipping_keeps_what_fits() {
        let clipped = clip_to_recording(vec![ev(0.5, 1.0), ev(1.8, 2.4), ev(2.1, 2.5)], 2.0);
        assert_eq!(clipped.len(), 2);
        assert_eq!(clipped[1].end, 2.0);
    }

    #[test]
    fn split_manifest_parsing() {
        let m = parse_split_manifest("# id split\n101_1b1 train\n102_1b1 TEST\n\n").unwrap();
        assert_eq!(m["101_1b1"], Split::Train);
        assert_eq!(m["102_1b1"], Split::Test);
        assert!(parse_split_manifest("a train\na test").is_err());
        assert!(parse_split_manifest("a validation").is_err());
        assert!(parse_split_manifest("a").is_err());
    }

    #[test]
    fn split_leak_detected() {
        let split = DatasetSplit {
            train: vec![ev(0.0, 1.0)],
            test: vec![ev(1.0, 2.0)],
        };
        assert!(split.validate().is_err());
    }

    #[test]
    fn scan_lists_all_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.wav"), b"").unwrap();
        let manifest = parse_split_manifest("a train\nb test").unwrap();
        match scan_corpus(dir.path(), &manifest) {
            Err(Error::MissingFiles(files)) => assert_eq!(files.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn disjoint_slices_fit_in_recording(cuts in prop::collection::btree_set(0u32..8000, 2..12)) {
            let rec = ramp(8000);
            let cuts: Vec<f64> = cuts.into_iter().map(|c| f64::from(c) / 4000.0).collect();
            let total: usize = cuts
                .windows(2)
                .step_by(2)
                .map(|w| slice_event(&rec, &ev(w[0], w[1])).unwrap().len())
                .sum();
            prop_assert!(total <= rec.samples.len());
        }
    }
}
