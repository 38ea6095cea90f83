//! Synthetic loop corpus and the preparation pipeline: tempo check, stretch
//! to 130 BPM, one-bar segments, split by source, conditioning extraction.

mod corpus;
mod prepare;
mod synth;

pub use corpus::{
    corpus_specs, generate_corpus, load_sources, read_loop_manifest, write_loop_manifest, CorpusEntry, LoopManifestLine,
    CORPUS_MANIFEST, CORPUS_SPECS,
};
pub use prepare::{
    load_prepared, prepare, write_prepared, PrepareConfig, PreparedCorpus, PreparedManifest, SegmentEntry,
    SegmentRecord, Skipped, SkippedEntry, SourceLoop, NORM_STATS_FILE, PREPARED_MANIFEST,
};
pub use synth::{synth_loop, synth_loop_at, Instrument, LoopSpec, Tone, MAX_BPM, MIN_BPM, STEPS_PER_BAR};

use serde::{Deserialize, Serialize};

use crate::features::BandActivations;

pub const TARGET_BPM: f64 = 130.0;
pub const MIN_CONFIDENCE: f64 = 0.99;
pub const TEST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Samples in one 4-beat bar.
pub fn bar_length(bpm: f64, sample_rate: u32) -> f64 {
    4.0 * 60.0 / bpm * sample_rate as f64
}

/// How close the loop is to a whole number of bars at `bpm`: 1 on an exact
/// multiple, 0 half a bar away.
pub fn tempo_confidence(loop_length: usize, bpm: f64, sample_rate: u32) -> f64 {
    if loop_length == 0 || bpm <= 0.0 || sample_rate == 0 {
        return 0.0;
    }
    let r = loop_length as f64 / bar_length(bpm, sample_rate);
    (1.0 - 2.0 * (r - r.round()).abs()).clamp(0.0, 1.0)
}

/// Keep rule for [`tempo_confidence`], tolerant to rounding at the boundary.
pub fn passes_confidence(confidence: f64) -> bool {
    confidence >= MIN_CONFIDENCE - 1e-9
}

/// Frame index (analysis hop 512) of every hit of one bar of `spec`,
/// after the bar is stretched to `segment_len` samples.
pub fn segment_hit_frames(spec: &LoopSpec, bar: usize, segment_len: usize) -> [Vec<usize>; 3] {
    let hop = crate::features::ANALYSIS_HOP as f64;
    let per_step = segment_len as f64 / STEPS_PER_BAR as f64;
    Instrument::ALL.map(|inst| {
        spec.hits(inst)
            .into_iter()
            .filter(|&s| s / STEPS_PER_BAR == bar)
            .map(|s| ((s % STEPS_PER_BAR) as f64 * per_step / hop).round() as usize)
            .collect()
    })
}

/// Share of expected hits whose band activation reaches `threshold` times
/// that band's maximum within `tolerance` frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitAlignment {
    pub aligned: usize,
    pub total: usize,
}

impl HitAlignment {
    pub fn measure(expected: &[Vec<usize>; 3], act: &BandActivations, tolerance: usize, threshold: f64) -> Self {
        let mut aligned = 0;
        let mut total = 0;
        for (frames, curve) in expected.iter().zip(act.bands()) {
            let max = curve.iter().fold(0.0f64, |m, v| m.max(*v));
            for &f in frames {
                total += 1;
                if max <= 0.0 || f >= curve.len() {
                    continue;
                }
                let lo = f.saturating_sub(tolerance);
                let hi = (f + tolerance).min(curve.len() - 1);
                if curve[lo..=hi].iter().any(|&v| v >= threshold * max) {
                    aligned += 1;
                }
            }
        }
        Self { aligned, total }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            aligned: self.aligned + other.aligned,
            total: self.total + other.total,
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.aligned as f64 / self.total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confidence_examples() {
        let bar = bar_length(130.0, 16000);
        assert!(tempo_confidence((4.0 * bar).round() as usize, 130.0, 16000) > 0.9999);
        let c = tempo_confidence((1.02 * bar).round() as usize, 130.0, 16000);
        assert!((c - 0.96).abs() < 1e-3 && c < MIN_CONFIDENCE);
        // 32160 / 32000 = 1.005 sits exactly on the threshold.
        let c = tempo_confidence(32160, 120.0, 16000);
        assert!((c - 0.99).abs() < 1e-9);
        assert!(passes_confidence(c));
        assert!(!passes_confidence(tempo_confidence(32170, 120.0, 16000)));
    }

    #[test]
    fn segment_duration() {
        assert!((29538.0f64 / 16000.0 - 1.846).abs() < 1e-3);
        assert_eq!(bar_length(130.0, 16000).floor() as usize, 29538);
    }

    proptest! {
        #[test]
        fn confidence_is_bounded_and_peaks_on_whole_bars(bars in 1usize..8, bpm in 120.0f64..140.0, off in -0.5f64..0.5) {
            let bar = bar_length(bpm, 16000);
            let exact = tempo_confidence((bars as f64 * bar).round() as usize, bpm, 16000);
            prop_assert!(exact > 0.9999);
            let c = tempo_confidence(((bars as f64 + off) * bar).round() as usize, bpm, 16000);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!((c - (1.0 - 2.0 * off.abs())).abs() < 1e-3);
        }
    }
}
