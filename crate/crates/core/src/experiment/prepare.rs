use std::collections::BTreeMap;
use std::io::BufWriter;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_json, ExperimentConfig, Layout};
use crate::corpus::{load_entry, parse_split_manifest, scan_corpus, slice_event, CorpusEntry, EventClass, LabeledEvent, Split};
use crate::dsp::{self, Spectrogram};
use crate::error::{Error, Result};
use crate::eventgen::{generate_events, write_event_csv, EventMode, EventRecord, PlacementWarning};
use crate::features::{write_feature_csv, EventFeatureVector, FeatureExtractor};
use crate::io_util::write_atomic;
use crate::models::Family;

/// Recordings processed together; bounds memory on large corpora.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub mode: EventMode,
    pub train_wheeze: usize,
    pub train_random: usize,
    pub test_wheeze: usize,
    pub test_random: usize,
    pub placement_warnings: usize,
}

impl ModeCounts {
    pub fn random_share(&self) -> f64 {
        let random = self.train_random + self.test_random;
        random as f64 / (random + self.train_wheeze + self.test_wheeze).max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub n_recordings: usize,
    /// Events dropped because they cover no whole sample.
    pub skipped_events: usize,
    pub modes: Vec<ModeCounts>,
}

struct EventProduct {
    event: LabeledEvent,
    features: EventFeatureVector,
    spectrogram: Option<Spectrogram>,
}

struct RecordingProducts {
    split: Split,
    seed: u64,
    wheezes: Vec<EventProduct>,
    random: Vec<Vec<EventProduct>>,
    warnings: Vec<Option<PlacementWarning>>,
    skipped: usize,
}

fn product(
    rec: &crate::corpus::AudioRecording,
    ev: &LabeledEvent,
    extractor: &FeatureExtractor,
    want_spec: bool,
) -> Result<Option<EventProduct>> {
    let samples = slice_event(rec, ev)?;
    if samples.is_empty() {
        log::warn!("{}: event [{}, {}] covers no sample; skipped", ev.recording_id, ev.start, ev.end);
        return Ok(None);
    }
    let features = extractor.extract(samples, ev.class, ev.duration())?;
    let spectrogram = if want_spec {
        let segment = dsp::prepare_segment(samples)?;
        Some(dsp::normalize01(&dsp::stft_magnitude(&segment, &extractor.config().stft)?))
    } else {
        None
    };
    Ok(Some(EventProduct {
        event: ev.clone(),
        features,
        spectrogram,
    }))
}

fn process(entry: &CorpusEntry, cfg: &ExperimentConfig, extractor: &FeatureExtractor, want_spec: bool) -> Result<RecordingProducts> {
    let loaded = load_entry(entry)?;
    let rec = &loaded.recording;
    let mut skipped = 0;
    let mut wheezes = Vec::with_capacity(loaded.wheezes.len());
    for w in &loaded.wheezes {
        match product(rec, w, extractor, want_spec)? {
            Some(p) => wheezes.push(p),
            None => skipped += 1,
        }
    }
    let mut random = Vec::new();
    let mut warnings = Vec::new();
    let mut seed = 0;
    for &mode in &cfg.experiment.modes {
        let generated = generate_events(&rec.id, rec.duration(), &loaded.wheezes, &cfg.generation(mode))?;
        seed = generated.seed;
        let mut products = Vec::with_capacity(generated.events.len());
        for ev in &generated.events {
            match product(rec, ev, extractor, want_spec)? {
                Some(p) => products.push(p),
                None => skipped += 1,
            }
        }
        random.push(products);
        warnings.push(generated.warning);
    }
    Ok(RecordingProducts {
        split: loaded.split,
        seed,
        wheezes,
        random,
        warnings,
        skipped,
    })
}

/// Spectrogram dump written to a temporary file, renamed into place at the end.
struct SpecSink {
    tmp: PathBuf,
    dest: PathBuf,
    out: BufWriter<std::fs::File>,
}

impl SpecSink {
    fn create(dest: PathBuf) -> Result<Self> {
        let dir = dest.parent().expect("layout paths have parents");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = dest.with_extension(format!("bin.tmp{}", std::process::id()));
        let f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        Ok(SpecSink {
            tmp,
            dest,
            out: BufWriter::new(f),
        })
    }

    fn push(&mut self, spec: &Spectrogram) -> Result<()> {
        dsp::write_spectrogram(&mut self.out, spec).map_err(|e| Error::io(&self.tmp, e))
    }

    fn finish(self) -> Result<()> {
        let f = self.out.into_inner().map_err(|e| Error::io(&self.tmp, e.into_error()))?;
        f.sync_all().map_err(|e| Error::io(&self.tmp, e))?;
        std::fs::rename(&self.tmp, &self.dest).map_err(|e| Error::io(&self.dest, e))
    }
}

#[derive(Default)]
struct Table {
    events: Vec<EventRecord>,
    features: Vec<EventFeatureVector>,
}

/// Loads the corpus, places random events for every configured mode and
/// writes event lists, feature matrices and (for the CNN) spectrograms.
/// Missing corpus files are all reported before anything is written.
pub fn cmd_prepare(cfg: &ExperimentConfig) -> Result<PrepareSummary> {
    cfg.validate()?;
    let manifest_path = &cfg.data.split_manifest;
    if !manifest_path.is_file() {
        return Err(Error::MissingFiles(vec![manifest_path.clone()]));
    }
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest = parse_split_manifest(&text)?;
    if manifest.is_empty() {
        return Err(Error::EmptyInput(format!("{} lists no recordings", manifest_path.display())));
    }
    let entries = scan_corpus(&cfg.data.data_dir, &manifest)?;

    cfg.write_effective()?;
    let layout: Layout = cfg.layout();
    let modes = &cfg.experiment.modes;
    let want_spec = cfg.experiment.families.contains(&Family::Cnn);
    let extractor = FeatureExtractor::default();
    let pool = cfg.pool()?;

    let mut tables: BTreeMap<(EventMode, Split), Table> = BTreeMap::new();
    let mut sinks: BTreeMap<(EventMode, Split), SpecSink> = BTreeMap::new();
    for &mode in modes {
        for split in [Split::Train, Split::Test] {
            tables.insert((mode, split), Table::default());
            if want_spec {
                sinks.insert((mode, split), SpecSink::create(layout.spectrograms(mode, split))?);
            }
        }
    }
    let mut warnings: Vec<(EventMode, PlacementWarning)> = Vec::new();
    let mut skipped = 0;

    for chunk in entries.chunks(CHUNK) {
        let products: Vec<RecordingProducts> = pool.install(|| {
            chunk
                .par_iter()
                .map(|e| process(e, cfg, &extractor, want_spec))
                .collect::<Result<_>>()
        })?;
        for rp in products {
            skipped += rp.skipped;
            for (m, &mode) in modes.iter().enumerate() {
                let key = (mode, rp.split);
                let table = tables.get_mut(&key).unwrap();
                for p in rp.wheezes.iter().chain(&rp.random[m]) {
                    table.events.push(EventRecord::from_event(&p.event, mode, rp.seed));
                    table.features.push(p.features.clone());
                    if let (Some(sink), Some(spec)) = (sinks.get_mut(&key), &p.spectrogram) {
                        sink.push(spec)?;
                    }
                }
                if let Some(w) = &rp.warnings[m] {
                    warnings.push((mode, w.clone()));
                }
            }
        }
    }

    let mut counts = Vec::new();
    for &mode in modes {
        let count = |split: Split, class: EventClass| tables[&(mode, split)].events.iter().filter(|e| e.class == class).count();
        counts.push(ModeCounts {
            mode,
            train_wheeze: count(Split::Train, EventClass::Wheeze),
            train_random: count(Split::Train, EventClass::Random),
            test_wheeze: count(Split::Test, EventClass::Wheeze),
            test_random: count(Split::Test, EventClass::Random),
            placement_warnings: warnings.iter().filter(|w| w.0 == mode).count(),
        });
    }
    for ((mode, split), table) in &tables {
        let mut buf = Vec::new();
        write_event_csv(&mut buf, &table.events)?;
        write_atomic(&layout.events(*mode, *split), &buf)?;
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &table.features)?;
        write_atomic(&layout.features(*mode, *split), &buf)?;
    }
    for sink in sinks.into_values() {
        sink.finish()?;
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["mode", "recording_id", "requested", "placed"])?;
        for (mode, wn) in &warnings {
            w.write_record([mode.as_str(), &wn.recording_id, &wn.requested.to_string(), &wn.placed.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(layout.placement_warnings(), e))?;
    }
    write_atomic(&layout.placement_warnings(), &buf)?;

    let summary = PrepareSummary {
        n_recordings: entries.len(),
        skipped_events: skipped,
        modes: counts,
    };
    write_json(&layout.prepare_summary(), &summary)?;
    for c in &summary.modes {
        log::info!(
            "prepared {}: train {} wheeze / {} random, test {} wheeze / {} random ({:.1}% random)",
            c.mode,
            c.train_wheeze,
            c.train_random,
            c.test_wheeze,
            c.test_random,
            100.0 * c.random_share()
        );
    }
    Ok(summary)
}
