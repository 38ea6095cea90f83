//! Conditioning features: per-sample rhythm and envelope curves plus global
//! pitch-class and timbral descriptors, assembled into the model input.
//!
//! Channel layout of an assembled input:
//!
//! | channels | content |
//! |---|---|
//! | 0..3 | kick, snare, hi-hat activations |
//! | 3 | envelope (absent when excluded) |
//! | next 12 | HPCP, C first |
//! | last 21 | timbral descriptors, band-major |

pub mod hpcp;
pub mod io;
pub mod local;
pub mod norm;
pub mod timbral;

pub use self::local::ACTIVATION_FLOOR;

pub use hpcp::{extract_hpcp, PITCH_CLASS_NAMES};
pub use io::{read_feature_file, write_feature_file, FeatureRecord, FEATURE_MAGIC};
pub use local::{extract_band_activations, extract_envelope, localize, BandActivations};
pub use norm::NormStats;
pub use timbral::{extract_timbral, timbral_index, timbral_names, TIMBRAL_LEN};

use crate::audio::AudioBuffer;
use crate::autodiff::Tensor;
use crate::dsp::iir::BandFilters;
use crate::dsp::SpectrogramConfig;
use crate::error::{Error, Result};

pub const ANALYSIS_FFT: usize = 1024;
pub const ANALYSIS_HOP: usize = 512;
pub const HPCP_LEN: usize = 12;
pub const LOCAL_WITH_ENVELOPE: usize = 4;
pub const LOCAL_WITHOUT_ENVELOPE: usize = 3;
/// Peaks at or below this are treated as silence.
pub const SILENCE_FLOOR: f64 = 1e-10;

/// The frame grid shared by activations, envelope and timbral descriptors.
pub fn analysis_config() -> SpectrogramConfig {
    SpectrogramConfig::new(ANALYSIS_FFT, ANALYSIS_HOP).expect("valid analysis grid")
}

pub fn channel_count(include_envelope: bool) -> usize {
    local_count(include_envelope) + HPCP_LEN + TIMBRAL_LEN
}

fn local_count(include_envelope: bool) -> usize {
    if include_envelope {
        LOCAL_WITH_ENVELOPE
    } else {
        LOCAL_WITHOUT_ENVELOPE
    }
}

/// Channel of timbral feature `i` in an assembled input.
pub fn timbral_channel(i: usize, include_envelope: bool) -> usize {
    local_count(include_envelope) + HPCP_LEN + i
}

pub fn hpcp_channel(i: usize, include_envelope: bool) -> usize {
    local_count(include_envelope) + i
}

/// Time-varying channels, one value per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalConditioning {
    pub kick_activation: Vec<f64>,
    pub snare_activation: Vec<f64>,
    pub hihat_activation: Vec<f64>,
    pub envelope: Vec<f64>,
}

impl LocalConditioning {
    pub fn channels(&self) -> [&[f64]; 4] {
        [
            &self.kick_activation,
            &self.snare_activation,
            &self.hihat_activation,
            &self.envelope,
        ]
    }

    pub fn len(&self) -> usize {
        self.kick_activation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Time-constant descriptors, broadcast over the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalConditioning {
    pub hpcp: [f64; HPCP_LEN],
    pub timbral: [f64; TIMBRAL_LEN],
}

/// Everything measured on a segment before timbral normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub local: LocalConditioning,
    pub hpcp: [f64; HPCP_LEN],
    pub timbral: [f64; TIMBRAL_LEN],
}

impl RawFeatures {
    pub fn normalized(&self, stats: &NormStats) -> ConditioningSet {
        ConditioningSet {
            local: self.local.clone(),
            global: GlobalConditioning {
                hpcp: self.hpcp,
                timbral: stats.normalize(&self.timbral),
            },
            segment_length: self.local.len(),
        }
    }
}

/// Runs every extractor once, sharing the band filtering.
pub fn extract_features(audio: &AudioBuffer) -> Result<RawFeatures> {
    let filters = BandFilters::for_rate(audio.sample_rate())?;
    let bands = filters.split(audio.samples());
    let act = local::activations_from_bands(&bands)?;
    let env = local::envelope_of(audio.samples());
    let len = audio.len();
    Ok(RawFeatures {
        local: LocalConditioning {
            kick_activation: localize(&act.kick, len)?,
            snare_activation: localize(&act.snare, len)?,
            hihat_activation: localize(&act.hihat, len)?,
            envelope: localize(&env, len)?,
        },
        hpcp: hpcp::hpcp_of(audio.samples(), audio.sample_rate()),
        timbral: timbral::timbral_from_bands(&bands, audio.sample_rate()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSet {
    pub local: LocalConditioning,
    pub global: GlobalConditioning,
    pub segment_length: usize,
}

impl ConditioningSet {
    pub fn extract(audio: &AudioBuffer, stats: &NormStats) -> Result<Self> {
        Ok(extract_features(audio)?.normalized(stats))
    }

    /// Checks lengths and the `[0, 1]` range of every value.
    pub fn validate(&self) -> Result<()> {
        for (i, ch) in self.local.channels().iter().enumerate() {
            if ch.len() != self.segment_length {
                return Err(Error::shape(
                    "conditioning",
                    format!("local channel {i} has {} samples, expected {}", ch.len(), self.segment_length),
                ));
            }
        }
        let in_range = |v: &f64| (0.0..=1.0).contains(v);
        let local_ok = self.local.channels().iter().all(|c| c.iter().all(in_range));
        if !local_ok || !self.global.hpcp.iter().all(in_range) || !self.global.timbral.iter().all(in_range) {
            return Err(Error::invalid("conditioning value outside [0, 1]"));
        }
        Ok(())
    }

    pub fn assemble(&self, include_envelope: bool) -> Result<Tensor<f32>> {
        assemble(&self.local, &self.global, include_envelope)
    }

    /// Rhythm and envelope from `self`, HPCP and timbre from `other`.
    pub fn with_globals_from(&self, other: &ConditioningSet) -> Self {
        Self {
            local: self.local.clone(),
            global: other.global.clone(),
            segment_length: self.segment_length,
        }
    }

    /// Inverse of [`assemble`] with the envelope included. Global channels
    /// are read at time 0.
    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self> {
        let shape = t.shape();
        if shape.len() != 2 || shape[0] != channel_count(true) {
            return Err(Error::shape(
                "conditioning",
                format!("expected {} × L, got {shape:?}", channel_count(true)),
            ));
        }
        let len = shape[1];
        let data = t.data();
        let row = |c: usize| -> Vec<f64> { data[c * len..(c + 1) * len].iter().map(|&v| v as f64).collect() };
        let at0 = |c: usize| data[c * len] as f64;
        Ok(Self {
            local: LocalConditioning {
                kick_activation: row(0),
                snare_activation: row(1),
                hihat_activation: row(2),
                envelope: row(3),
            },
            global: GlobalConditioning {
                hpcp: std::array::from_fn(|i| at0(hpcp_channel(i, true))),
                timbral: std::array::from_fn(|i| at0(timbral_channel(i, true))),
            },
            segment_length: len,
        })
    }
}

/// Stacks local channels and broadcast globals into `channels × length`.
pub fn assemble(
    local: &LocalConditioning,
    global: &GlobalConditioning,
    include_envelope: bool,
) -> Result<Tensor<f32>> {
    let len = local.len();
    let channels = local.channels();
    if let Some(bad) = channels.iter().position(|c| c.len() != len) {
        return Err(Error::shape(
            "assemble",
            format!("local channel {bad} has {} samples, expected {len}", channels[bad].len()),
        ));
    }
    let n_local = local_count(include_envelope);
    let total = channel_count(include_envelope);
    let mut data = Vec::with_capacity(total * len);
    for ch in &channels[..n_local] {
        data.extend(ch.iter().map(|&v| v as f32));
    }
    for &v in global.hpcp.iter().chain(&global.timbral) {
        data.extend(std::iter::repeat_n(v as f32, len));
    }
    Tensor::new(vec![total, len], data)
}

/// Removes the envelope channel from a 37-channel input.
pub fn drop_envelope(t: &Tensor<f32>) -> Result<Tensor<f32>> {
    let shape = t.shape();
    if shape.len() != 2 || shape[0] != channel_count(true) {
        return Err(Error::shape("drop_envelope", format!("got {shape:?}")));
    }
    let len = shape[1];
    let mut data = t.data().to_vec();
    data.drain(3 * len..4 * len);
    Tensor::new(vec![channel_count(false), len], data)
}
