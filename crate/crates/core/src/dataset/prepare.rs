//! From source loops to normalized one-bar segments on disk.

use std::collections::BTreeSet;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{passes_confidence, tempo_confidence, Split, TARGET_BPM, TEST_FRACTION};
use crate::audio::{read_wav, write_wav, AudioBuffer, CANONICAL_RATE};
use crate::dsp::{resample, time_stretch};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, read_feature_file, write_feature_file, ConditioningSet, FeatureRecord, NormStats, RawFeatures,
};
use crate::model::SEGMENT_LEN;

pub const PREPARED_MANIFEST: &str = "manifest.json";
pub const NORM_STATS_FILE: &str = "norm_stats.txt";
const SEGMENT_DIR: &str = "segments";
const FEATURE_DIR: &str = "features";
/// A final segment this close to a full bar is zero-padded instead of
/// dropped (1 ms at 16 kHz).
const TAIL_SLACK: usize = 16;

#[derive(Debug, Clone)]
pub struct SourceLoop {
    pub id: String,
    pub audio: AudioBuffer,
    pub bpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareConfig {
    pub target_bpm: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            target_bpm: TARGET_BPM,
            test_fraction: TEST_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SegmentRecord {
    pub id: String,
    pub source: String,
    /// Bar index within the source loop.
    pub bar: usize,
    pub audio: AudioBuffer,
    pub raw: RawFeatures,
    pub conditioning: ConditioningSet,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub segments: Vec<SegmentRecord>,
    pub stats: NormStats,
    pub skipped: Vec<Skipped>,
}

impl PreparedCorpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SegmentRecord> {
        self.segments.iter().filter(move |s| s.split == split)
    }
}

struct Stage {
    id: String,
    bars: Vec<AudioBuffer>,
}

fn stage(source: &SourceLoop, config: &PrepareConfig) -> std::result::Result<Stage, String> {
    let confidence = tempo_confidence(source.audio.len(), source.bpm, source.audio.sample_rate());
    if !passes_confidence(confidence) {
        return Err(format!("tempo confidence {confidence:.4} below threshold"));
    }
    let ratio = config.target_bpm / source.bpm;
    let stretched = if (ratio - 1.0).abs() < 1e-12 {
        source.audio.clone()
    } else {
        time_stretch(&source.audio, ratio).map_err(|e| e.to_string())?
    };
    let audio = resample(&stretched, CANONICAL_RATE).map_err(|e| e.to_string())?;
    let x = audio.samples();
    let mut bars = Vec::new();
    let mut start = 0;
    while start + SEGMENT_LEN <= x.len() + TAIL_SLACK {
        let mut seg = x[start..(start + SEGMENT_LEN).min(x.len())].to_vec();
        seg.resize(SEGMENT_LEN, 0.0);
        bars.push(AudioBuffer::new(seg, CANONICAL_RATE).map_err(|e| e.to_string())?);
        start += SEGMENT_LEN;
    }
    if bars.is_empty() {
        return Err(format!("{} samples after stretching, shorter than one bar", x.len()));
    }
    Ok(Stage {
        id: source.id.clone(),
        bars,
    })
}

/// Sources in id order, shuffled by `seed`; the first `round(fraction · n)`
/// (at least one when there are two or more sources) are held out.
fn test_sources(ids: &[String], fraction: f64, seed: u64) -> BTreeSet<String> {
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    sorted.dedup();
    let n = sorted.len();
    let count = if n >= 2 {
        ((fraction * n as f64).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    sorted.into_iter().take(count).cloned().collect()
}

/// Filters, stretches, segments, splits by source and extracts
/// conditioning. Timbral statistics are fitted on the training split.
pub fn prepare(loops: &[SourceLoop], config: &PrepareConfig) -> Result<PreparedCorpus> {
    let ids: BTreeSet<&str> = loops.iter().map(|l| l.id.as_str()).collect();
    if ids.len() != loops.len() {
        return Err(Error::invalid("source loop ids must be unique"));
    }
    let staged: Vec<std::result::Result<Stage, String>> = loops.par_iter().map(|l| stage(l, config)).collect();
    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    for (source, result) in loops.iter().zip(staged) {
        match result {
            Ok(s) => kept.push(s),
            Err(reason) => {
                warn!("skipping loop {}: {reason}", source.id);
                skipped.push(Skipped {
                    id: source.id.clone(),
                    reason,
                });
            }
        }
    }
    kept.sort_by(|a, b| a.id.cmp(&b.id));
    let kept_ids: Vec<String> = kept.iter().map(|s| s.id.clone()).collect();
    let held_out = test_sources(&kept_ids, config.test_fraction, config.seed);

    let jobs: Vec<(String, usize, AudioBuffer, Split)> = kept
        .into_iter()
        .flat_map(|s| {
            let split = if held_out.contains(&s.id) { Split::Test } else { Split::Train };
            let id = s.id;
            s.bars
                .into_iter()
                .enumerate()
                .map(move |(bar, audio)| (id.clone(), bar, audio, split))
        })
        .collect();
    let raws: Vec<RawFeatures> = jobs
        .par_iter()
        .map(|(_, _, audio, _)| extract_features(audio))
        .collect::<Result<_>>()?;

    let train_timbral: Vec<[f64; 21]> = jobs
        .iter()
        .zip(&raws)
        .filter(|(j, _)| j.3 == Split::Train)
        .map(|(_, r)| r.timbral)
        .collect();
    if train_timbral.is_empty() {
        return Err(Error::invalid("no training segments survived preparation"));
    }
    let stats = NormStats::fit(&train_timbral)?;
    let segments = jobs
        .into_iter()
        .zip(raws)
        .map(|((source, bar, audio, split), raw)| SegmentRecord {
            id: format!("{source}_{bar:02}"),
            source,
            bar,
            audio,
            conditioning: raw.normalized(&stats),
            raw,
            split,
        })
        .collect();
    Ok(PreparedCorpus {
        segments,
        stats,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub id: String,
    pub source: String,
    pub bar: usize,
    pub split: Split,
    /// Relative to the prepared directory.
    pub audio: String,
    pub features: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedManifest {
    pub sample_rate: u32,
    pub segment_len: usize,
    pub segments: Vec<SegmentEntry>,
    pub skipped: Vec<SkippedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub id: String,
    pub reason: String,
}

impl PreparedManifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(PREPARED_MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &SegmentEntry> {
        self.segments.iter().filter(move |s| s.split == split)
    }
}

/// Writes `segments/<id>.wav`, `features/<id>.lfc`, the manifest and the
/// normalization statistics under `dir`.
pub fn write_prepared(corpus: &PreparedCorpus, dir: impl AsRef<Path>) -> Result<PreparedManifest> {
    let dir = dir.as_ref();
    for sub in [SEGMENT_DIR, FEATURE_DIR] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut entries: Vec<SegmentEntry> = corpus
        .segments
        .par_iter()
        .map(|seg| {
            let audio = format!("{SEGMENT_DIR}/{}.wav", seg.id);
            let features = format!("{FEATURE_DIR}/{}.lfc", seg.id);
            write_wav(dir.join(&audio), &seg.audio)?;
            write_feature_file(
                dir.join(&features),
                &FeatureRecord {
                    id: seg.id.clone(),
                    conditioning: seg.conditioning.assemble(true)?,
                },
            )?;
            Ok(SegmentEntry {
                id: seg.id.clone(),
                source: seg.source.clone(),
                bar: seg.bar,
                split: seg.split,
                audio,
                features,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest = PreparedManifest {
        sample_rate: CANONICAL_RATE,
        segment_len: SEGMENT_LEN,
        segments: entries,
        skipped: corpus
            .skipped
            .iter()
            .map(|s| SkippedEntry {
                id: s.id.clone(),
                reason: s.reason.clone(),
            })
            .collect(),
    };
    let path = dir.join(PREPARED_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    corpus.stats.save(dir.join(NORM_STATS_FILE))?;
    Ok(manifest)
}

/// Reads one prepared segment: target audio and assembled conditioning.
pub fn load_prepared(dir: impl AsRef<Path>, entry: &SegmentEntry) -> Result<(AudioBuffer, FeatureRecord)> {
    let dir = dir.as_ref();
    let audio = read_wav(dir.join(&entry.audio))?;
    let features = read_feature_file(dir.join(&entry.features))?;
    if audio.len() != SEGMENT_LEN || features.conditioning.shape()[1] != SEGMENT_LEN {
        return Err(Error::format("prepared segment", format!("{} has the wrong length", entry.id)));
    }
    Ok((audio, features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_loop, LoopSpec};

    fn source(id: &str, spec: &LoopSpec) -> SourceLoop {
        SourceLoop {
            id: id.into(),
            audio: synth_loop(spec).unwrap(),
            bpm: spec.bpm,
        }
    }

    #[test]
    fn four_bars_at_120_give_four_segments() {
        let mut spec = LoopSpec::random(1, 4);
        spec.bpm = 120.0;
        let s = stage(&source("a", &spec), &PrepareConfig::default()).unwrap();
        assert_eq!(s.bars.len(), 4);
        assert!(s.bars.iter().all(|b| b.len() == SEGMENT_LEN && b.sample_rate() == 16000));
    }

    #[test]
    fn off_tempo_loops_are_skipped() {
        let spec = LoopSpec::random(2, 2);
        let mut src = source("b", &spec);
        let extra = (src.audio.len() as f64 * 0.02) as usize;
        let mut x = src.audio.samples().to_vec();
        x.extend(std::iter::repeat_n(0.0, extra));
        src.audio = AudioBuffer::new(x, 16000).unwrap();
        assert!(stage(&src, &PrepareConfig::default()).is_err());
    }

    #[test]
    fn split_keeps_sources_apart() {
        let ids: Vec<String> = (0..10).map(|i| format!("loop_{i:03}")).collect();
        let test = test_sources(&ids, 0.1, 3);
        assert_eq!(test.len(), 1);
        assert_eq!(test, test_sources(&ids, 0.1, 3));
        assert!(test_sources(&ids[..1], 0.1, 3).is_empty());
    }

    #[test]
    fn prepare_small_corpus() {
        let loops: Vec<SourceLoop> = (0..4)
            .map(|i| source(&format!("l{i}"), &LoopSpec::random(10 + i, 1 + i as usize % 2)))
            .collect();
        let corpus = prepare(&loops, &PrepareConfig::default()).unwrap();
        assert!(corpus.skipped.is_empty());
        assert_eq!(corpus.segments.len(), 6);
        let train: BTreeSet<&str> = corpus.split(Split::Train).map(|s| s.source.as_str()).collect();
        let test: BTreeSet<&str> = corpus.split(Split::Test).map(|s| s.source.as_str()).collect();
        assert!(!test.is_empty() && train.is_disjoint(&test));
        for seg in &corpus.segments {
            assert_eq!(seg.audio.len(), SEGMENT_LEN);
            seg.conditioning.validate().unwrap();
        }
    }
}
