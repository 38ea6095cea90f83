//! Procedural drum loops: synthetic kick, snare and hi-hat on a 16th grid
//! with an optional sustained tonal layer.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioBuffer, CANONICAL_RATE};
use crate::dsp::iir::{design_iir, filter_samples, FilterKind};
use crate::error::{Error, Result};

pub const MIN_BPM: f64 = 120.0;
pub const MAX_BPM: f64 = 140.0;
pub const STEPS_PER_BAR: usize = 16;
pub const PEAK_LEVEL: f64 = 0.9;

const KICK_DECAY: f64 = 0.080;
const KICK_SWEEP_DECAY: f64 = 0.030;
const KICK_START_HZ: f64 = 120.0;
const KICK_END_HZ: f64 = 50.0;
const SNARE_DECAY: f64 = 0.060;
const SNARE_BAND_HZ: (f64, f64) = (180.0, 400.0);
const SNARE_TONE_HZ: f64 = 200.0;
const HIHAT_DECAY: f64 = 0.025;
const HIHAT_CUTOFF_HZ: f64 = 7000.0;
/// Events are cut once their envelope falls below -43 dB.
const TAIL_DECAYS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Kick,
    Snare,
    Hihat,
}

impl Instrument {
    pub const ALL: [Instrument; 3] = [Instrument::Kick, Instrument::Snare, Instrument::Hihat];
}

/// A sustained sine at a pitch class of octave 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// 0 = C … 11 = B.
    pub pitch_class: u8,
    pub amplitude: f64,
}

impl Tone {
    pub fn frequency(&self) -> f64 {
        440.0 * 2f64.powf((self.pitch_class as f64 - 9.0) / 12.0)
    }
}

/// One loop: tempo, per-step velocities (0 = no hit) and an optional tonal
/// layer. Pattern vectors hold `16 · bars` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub bpm: f64,
    pub bars: usize,
    pub kick: Vec<f64>,
    pub snare: Vec<f64>,
    pub hihat: Vec<f64>,
    pub tonal: Vec<Tone>,
    pub seed: u64,
}

impl LoopSpec {
    pub fn empty(bpm: f64, bars: usize, seed: u64) -> Self {
        let n = bars * STEPS_PER_BAR;
        Self {
            bpm,
            bars,
            kick: vec![0.0; n],
            snare: vec![0.0; n],
            hihat: vec![0.0; n],
            tonal: Vec::new(),
            seed,
        }
    }

    /// A plausible groove: kick on the downbeat, backbeat snare, eighth or
    /// sixteenth hats, random extras and an optional chord.
    pub fn random(seed: u64, bars: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bpm = (rng.random_range(MIN_BPM..=MAX_BPM) * 100.0).round() / 100.0;
        let mut spec = Self::empty(bpm, bars, seed);
        let sixteenth_hats = rng.random_bool(0.5);
        for bar in 0..bars {
            let base = bar * STEPS_PER_BAR;
            for step in 0..STEPS_PER_BAR {
                let i = base + step;
                let kick = step == 0
                    || (step == 8 && rng.random_bool(0.8))
                    || (step % 2 == 0 && step % 4 != 0 && rng.random_bool(0.15));
                if kick {
                    spec.kick[i] = rng.random_range(0.7..=1.0);
                }
                let snare = step == 4 || step == 12 || (step % 2 == 1 && rng.random_bool(0.06));
                if snare && spec.kick[i] == 0.0 {
                    spec.snare[i] = rng.random_range(0.7..=1.0);
                }
                let hat_slot = sixteenth_hats || step % 2 == 0;
                if hat_slot && rng.random_bool(0.9) {
                    spec.hihat[i] = rng.random_range(0.8..=1.0);
                }
            }
        }
        if rng.random_bool(0.75) {
            let count = rng.random_range(1..=3);
            let mut classes: Vec<u8> = (0..12).collect();
            for k in 0..count {
                let j = rng.random_range(k..12);
                classes.swap(k, j);
                spec.tonal.push(Tone {
                    pitch_class: classes[k],
                    amplitude: rng.random_range(0.05..=0.2),
                });
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_BPM..=MAX_BPM).contains(&self.bpm) {
            return Err(Error::invalid(format!("bpm {} outside [120, 140]", self.bpm)));
        }
        if self.bars == 0 {
            return Err(Error::invalid("a loop needs at least one bar"));
        }
        let steps = self.steps();
        for (name, pattern) in [("kick", &self.kick), ("snare", &self.snare), ("hihat", &self.hihat)] {
            if pattern.len() != steps {
                return Err(Error::invalid(format!("{name} pattern has {} steps, expected {steps}", pattern.len())));
            }
            if pattern.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid(format!("{name} velocity outside (0, 1]")));
            }
        }
        if self.tonal.iter().any(|t| t.pitch_class > 11 || !t.amplitude.is_finite()) {
            return Err(Error::invalid("bad tonal layer"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.bars * STEPS_PER_BAR
    }

    pub fn pattern(&self, instrument: Instrument) -> &[f64] {
        match instrument {
            Instrument::Kick => &self.kick,
            Instrument::Snare => &self.snare,
            Instrument::Hihat => &self.hihat,
        }
    }

    /// Steps with a hit.
    pub fn hits(&self, instrument: Instrument) -> Vec<usize> {
        self.pattern(instrument)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn samples_per_step(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 * 60.0 / self.bpm / 4.0
    }

    pub fn onset_sample(&self, step: usize, sample_rate: u32) -> usize {
        (step as f64 * self.samples_per_step(sample_rate)).round() as usize
    }

    /// `bars · 4` beats at the spec tempo.
    pub fn length(&self, sample_rate: u32) -> usize {
        (self.steps() as f64 * self.samples_per_step(sample_rate)).round() as usize
    }
}

/// Renders `spec` at 16 kHz.
pub fn synth_loop(spec: &LoopSpec) -> Result<AudioBuffer> {
    synth_loop_at(spec, CANONICAL_RATE)
}

pub fn synth_loop_at(spec: &LoopSpec, sample_rate: u32) -> Result<AudioBuffer> {
    spec.validate()?;
    let sr = sample_rate as f64;
    let len = spec.length(sample_rate);
    let mut out = vec![0.0; len];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let snare_hp = design_iir(FilterKind::HighPass1, SNARE_BAND_HZ.0, sample_rate)?;
    let snare_lp = design_iir(FilterKind::LowPass1, SNARE_BAND_HZ.1, sample_rate)?;
    let hat_hp = design_iir(FilterKind::HighPass1, HIHAT_CUTOFF_HZ.min(0.45 * sr), sample_rate)?;

    for step in 0..spec.steps() {
        let onset = spec.onset_sample(step, sample_rate);
        let v = spec.kick[step];
        if v > 0.0 {
            let n = ((TAIL_DECAYS * KICK_DECAY * sr) as usize).min(len - onset);
            let mut phase = 0.0;
            for i in 0..n {
                let t = i as f64 / sr;
                let f = KICK_END_HZ + (KICK_START_HZ - KICK_END_HZ) * (-t / KICK_SWEEP_DECAY).exp();
                phase += 2.0 * PI * f / sr;
                out[onset + i] += v * phase.sin() * (-t / KICK_DECAY).exp();
            }
        }
        let v = spec.snare[step];
        if v > 0.0 {
            let n = ((TAIL_DECAYS * SNARE_DECAY * sr) as usize).min(len - onset);
            let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let band = filter_samples(&filter_samples(&noise, &snare_hp), &snare_lp);
            for i in 0..n {
                let t = i as f64 / sr;
                let tone = 0.5 * (2.0 * PI * SNARE_TONE_HZ * t).sin();
                out[onset + i] += v * (1.5 * band[i] + tone) * (-t / SNARE_DECAY).exp();
            }
        }
        let v = spec.hihat[step];
        if v > 0.0 {
            let n = ((TAIL_DECAYS * HIHAT_DECAY * sr) as usize).min(len - onset);
            let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let hp = filter_samples(&filter_samples(&noise, &hat_hp), &hat_hp);
            for i in 0..n {
                let t = i as f64 / sr;
                out[onset + i] += v * 0.6 * hp[i] * (-t / HIHAT_DECAY).exp();
            }
        }
    }
    for tone in &spec.tonal {
        let w = 2.0 * PI * tone.frequency() / sr;
        for (i, o) in out.iter_mut().enumerate() {
            *o += tone.amplitude * (w * i as f64).sin();
        }
    }
    Ok(AudioBuffer::new(out, sample_rate)?.peak_normalized(PEAK_LEVEL))
}
