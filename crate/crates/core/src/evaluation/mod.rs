//! Output quality and control coherence: a handcrafted-embedding Fréchet
//! distance with a Griffin-Lim reference row, the timbral ordering sweep and
//! table rendering.

pub mod coherence;
pub mod embed;
pub mod frechet;
pub mod report;

pub use coherence::{
    coherence_sweep, coherence_sweep_with, CoherenceReport, FeatureCoherence, ModelSynthesizer, OracleSynthesizer,
    RandomSynthesizer, Synthesizer, SWEEP_LEVELS,
};
pub use embed::{embed, EMBEDDING_DIM, EMBEDDING_SPEC};
pub use frechet::{frechet_distance, FrechetReport};
pub use report::{Row, Table};

use rayon::prelude::*;

use crate::audio::AudioBuffer;
use crate::dsp::stft::stft_magnitudes;
use crate::dsp::{griffin_lim, SpectrogramLayout};
use crate::error::Result;
use crate::features::{analysis_config, ConditioningSet};

/// Name of the quality column in every report.
pub const QUALITY_METRIC: &str = "FD-handcrafted";
pub const GRIFFIN_LIM_ROW: &str = "Griffin-Lim";

pub fn embed_all(audio: &[AudioBuffer]) -> Result<Vec<Vec<f64>>> {
    audio.par_iter().map(embed).collect()
}

/// Distance between the embeddings of a reference and a generated set.
pub fn frechet_report(reference: &[AudioBuffer], generated: &[AudioBuffer]) -> Result<FrechetReport> {
    let a = embed_all(reference)?;
    let b = embed_all(generated)?;
    Ok(FrechetReport {
        distance: frechet_distance(&a, &b)?,
        embedding: EMBEDDING_SPEC.to_string(),
        size_a: a.len(),
        size_b: b.len(),
    })
}

/// Each clip rebuilt by Griffin-Lim from its own analysis-grid magnitudes.
pub fn griffin_lim_baseline(audio: &[AudioBuffer], iterations: usize, seed: u64) -> Result<Vec<AudioBuffer>> {
    let cfg = analysis_config();
    audio
        .par_iter()
        .map(|a| {
            let mags = stft_magnitudes(a.samples(), cfg)?;
            let layout = SpectrogramLayout::for_signal(cfg, a.len(), a.sample_rate());
            griffin_lim(&mags, layout, iterations, seed)
        })
        .collect()
}

/// One output per conditioning set.
pub fn synthesize_all(synth: &dyn Synthesizer, conditioning: &[ConditioningSet]) -> Result<Vec<AudioBuffer>> {
    conditioning.par_iter().map(|c| synth.synthesize(c)).collect()
}

/// Quality table: one row per entry of `distances`.
pub fn quality_table(distances: &[(String, f64)]) -> Result<Table> {
    let mut t = Table::new(
        format!("Output quality ({EMBEDDING_SPEC})"),
        "model",
        vec![QUALITY_METRIC.to_string()],
    );
    for (name, d) in distances {
        t.push(name.clone(), vec![*d])?;
    }
    Ok(t)
}

/// Coherence table: E1, E2, E3 in percent per model.
pub fn coherence_table(reports: &[CoherenceReport]) -> Result<Table> {
    let mut t = Table::new(
        "Timbral feature coherence (%)",
        "model",
        vec!["E1".into(), "E2".into(), "E3".into()],
    );
    for r in reports {
        t.push(r.synthesizer.clone(), vec![r.e1, r.e2, r.e3])?;
    }
    Ok(t)
}

/// Per-feature breakdown of one coherence report.
pub fn feature_table(report: &CoherenceReport) -> Result<Table> {
    let mut t = Table::new(
        format!("Per-feature coherence of {} (%)", report.synthesizer),
        "feature",
        vec!["E1".into(), "E2".into(), "E3".into()],
    );
    for f in &report.per_feature {
        t.push(f.name.clone(), vec![f.e1, f.e2, f.e3])?;
    }
    Ok(t)
}
