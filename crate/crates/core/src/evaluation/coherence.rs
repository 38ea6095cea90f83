//! Feature-coherence sweep: raise one timbral input at a time and check
//! that the matching descriptor of the output rises with it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audio::{AudioBuffer, CANONICAL_RATE};
use crate::autodiff::Scalar;
use crate::dsp::iir::{filter_samples, BandFilters};
use crate::error::Result;
use crate::features::timbral::{descriptors, timbral_index, DESCRIPTORS};
use crate::features::{timbral_names, ConditioningSet, TIMBRAL_LEN};
use crate::model::WaveUNet;

/// Normalized input values of the sweep, low to high.
pub const SWEEP_LEVELS: [f64; 3] = [0.2, 0.5, 0.8];

/// Anything that turns conditioning into audio.
pub trait Synthesizer: Sync {
    fn name(&self) -> String;
    fn synthesize(&self, conditioning: &ConditioningSet) -> Result<AudioBuffer>;
}

/// A trained network; magnitude outputs are inverted with Griffin-Lim.
pub struct ModelSynthesizer<T> {
    pub model: WaveUNet<T>,
    pub griffin_lim_iterations: usize,
}

impl<T: Scalar> Synthesizer for ModelSynthesizer<T> {
    fn name(&self) -> String {
        self.model.config().variant.to_string()
    }

    fn synthesize(&self, conditioning: &ConditioningSet) -> Result<AudioBuffer> {
        let input = conditioning
            .assemble(self.model.config().variant.include_envelope())?
            .cast::<T>();
        self.model.synthesize(&input, self.griffin_lim_iterations, 0)
    }
}

/// Per-feature pass rates of the three ordering tests, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCoherence {
    pub name: String,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub synthesizer: String,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub per_feature: Vec<FeatureCoherence>,
    pub loops: usize,
    /// Syntheses run: loops × 21 features × 3 levels.
    pub total_outputs: usize,
}

impl CoherenceReport {
    /// Mean of the three tests restricted to `features`.
    pub fn accuracy_over(&self, features: &[usize]) -> [f64; 3] {
        let n = features.len().max(1) as f64;
        let mut acc = [0.0; 3];
        for &i in features {
            let f = &self.per_feature[i];
            acc[0] += f.e1;
            acc[1] += f.e2;
            acc[2] += f.e3;
        }
        acc.map(|v| v / n)
    }
}

/// For each loop, each of the 21 timbral inputs and each level: overwrite
/// that input, synthesize, and re-measure the same descriptor on the output.
///
/// E1 checks high > low, E2 high > mid and E3 mid > low; ties fail. Raw
/// descriptors are compared, since min-max clipping would turn outputs
/// beyond the training range into ties.
pub fn coherence_sweep(
    synth: &dyn Synthesizer,
    loops: &[ConditioningSet],
    levels: [f64; 3],
) -> Result<CoherenceReport> {
    coherence_sweep_with(synth, loops, levels, &measure)
}

/// [`coherence_sweep`] with a custom measurement of feature `index` on an
/// output.
pub fn coherence_sweep_with(
    synth: &dyn Synthesizer,
    loops: &[ConditioningSet],
    levels: [f64; 3],
    measure: &(dyn Fn(&AudioBuffer, usize) -> f64 + Sync),
) -> Result<CoherenceReport> {
    let jobs: Vec<(usize, usize, usize)> = (0..loops.len())
        .flat_map(|l| (0..TIMBRAL_LEN).flat_map(move |f| (0..3).map(move |k| (l, f, k))))
        .collect();
    let measured: Vec<f64> = jobs
        .par_iter()
        .map(|&(l, f, k)| {
            let mut cond = loops[l].clone();
            cond.global.timbral[f] = levels[k];
            let audio = synth.synthesize(&cond)?;
            Ok(measure(&audio, f))
        })
        .collect::<Result<_>>()?;

    let mut pass = vec![[0usize; 3]; TIMBRAL_LEN];
    for (chunk, &(_, f, _)) in measured.chunks_exact(3).zip(jobs.iter().step_by(3)) {
        let (lo, mid, hi) = (chunk[0], chunk[1], chunk[2]);
        pass[f][0] += (hi > lo) as usize;
        pass[f][1] += (hi > mid) as usize;
        pass[f][2] += (mid > lo) as usize;
    }
    let n = loops.len().max(1) as f64;
    let names = timbral_names();
    let per_feature: Vec<FeatureCoherence> = pass
        .iter()
        .zip(names)
        .map(|(p, name)| FeatureCoherence {
            name,
            e1: 100.0 * p[0] as f64 / n,
            e2: 100.0 * p[1] as f64 / n,
            e3: 100.0 * p[2] as f64 / n,
        })
        .collect();
    let all: Vec<usize> = (0..TIMBRAL_LEN).collect();
    let mut report = CoherenceReport {
        synthesizer: synth.name(),
        e1: 0.0,
        e2: 0.0,
        e3: 0.0,
        per_feature,
        loops: loops.len(),
        total_outputs: jobs.len(),
    };
    [report.e1, report.e2, report.e3] = report.accuracy_over(&all);
    Ok(report)
}

/// Raw value of timbral feature `index` of `audio`.
pub fn measure(audio: &AudioBuffer, index: usize) -> f64 {
    let band = index / DESCRIPTORS.len();
    let filters = BandFilters::for_rate(audio.sample_rate()).expect("analysis rate");
    let x = filter_samples(audio.samples(), filters.bands()[band]);
    descriptors(&x, audio.sample_rate())[index % DESCRIPTORS.len()]
}

const BRIGHTNESS: usize = 2;
const DEPTH: usize = 1;
const SHARPNESS: usize = 6;
/// Tone range of the oracle in each band, Hz.
const ORACLE_RANGES: [(f64, f64); 3] = [(40.0, 160.0), (150.0, 600.0), (6000.0, 7800.0)];

/// Three sustained tones, one per analysis band, whose frequencies follow
/// the requested brightness, sharpness and (inverted) depth of that band.
/// Each tone's amplitude cancels its band filter's gain, so the band sees a
/// fixed-level tone moving in frequency.
pub struct OracleSynthesizer {
    pub length: usize,
}

impl OracleSynthesizer {
    /// Features whose ordering the oracle realizes.
    pub fn controlled_features() -> Vec<usize> {
        (0..3)
            .flat_map(|b| [BRIGHTNESS, DEPTH, SHARPNESS].map(|d| timbral_index(b, d)))
            .collect()
    }
}

impl Synthesizer for OracleSynthesizer {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn synthesize(&self, conditioning: &ConditioningSet) -> Result<AudioBuffer> {
        let filters = BandFilters::for_rate(CANONICAL_RATE)?;
        let t = &conditioning.global.timbral;
        let mut out = vec![0.0; self.length];
        for (band, &(lo, hi)) in ORACLE_RANGES.iter().enumerate() {
            let control = t[timbral_index(band, BRIGHTNESS)] + t[timbral_index(band, SHARPNESS)]
                - t[timbral_index(band, DEPTH)];
            let freq = lo + (hi - lo) * ((control + 1.0) / 3.0).clamp(0.0, 1.0);
            let amp = 0.2 / filters.bands()[band].response(freq).norm();
            let w = 2.0 * PI * freq / CANONICAL_RATE as f64;
            for (i, o) in out.iter_mut().enumerate() {
                *o += amp * (w * i as f64).sin();
            }
        }
        AudioBuffer::new(out, CANONICAL_RATE)
    }
}

/// Output unrelated to its input: band-filtered noise with random gains,
/// seeded by the conditioning so that runs repeat.
pub struct RandomSynthesizer {
    pub length: usize,
    pub seed: u64,
}

impl Synthesizer for RandomSynthesizer {
    fn name(&self) -> String {
        "random".into()
    }

    fn synthesize(&self, conditioning: &ConditioningSet) -> Result<AudioBuffer> {
        let key = conditioning
            .global
            .timbral
            .iter()
            .chain(&conditioning.global.hpcp)
            .fold(self.seed, |h, v| (h ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3).rotate_left(17));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let filters = BandFilters::for_rate(CANONICAL_RATE)?;
        let mut out = vec![0.0; self.length];
        for f in filters.bands() {
            let gain = rng.random_range(0.0..1.0);
            let attack = rng.random_range(1.0..4000.0);
            let noise: Vec<f64> = (0..self.length).map(|_| rng.random_range(-1.0..1.0)).collect();
            for (i, (o, v)) in out.iter_mut().zip(filter_samples(&noise, f)).enumerate() {
                *o += gain * v * (i as f64 / attack).min(1.0);
            }
        }
        let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        AudioBuffer::new(out.into_iter().map(|v| 0.9 * v / peak).collect(), CANONICAL_RATE)
    }
}
