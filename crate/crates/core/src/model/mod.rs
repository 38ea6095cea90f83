//! The conditional Wave-U-Net generator and its five trained variants.

mod checkpoint;
mod net;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ModelManifest, CHECKPOINT_MAGIC};
pub use net::{ModelOutput, Prediction, WaveUNet};

use std::fmt;
use std::str::FromStr;

use crate::dsp::SpectrogramConfig;
use crate::error::{Error, Result};
use crate::losses::LossKind;

/// One bar at 130 BPM and 16 kHz.
pub const SEGMENT_LEN: usize = 29538;
/// `30 · 2^10`, the smallest multiple of `2^10` above [`SEGMENT_LEN`].
pub const PADDED_LEN: usize = 30720;
pub const KERNEL: usize = 5;
pub const LEAKY_SLOPE: f64 = 0.2;
pub const ENCODER_LEVELS: usize = 10;
/// Levels of the frame-rate network of the STFT variant.
pub const STFT_LEVELS: usize = 4;
/// Frames are padded to a multiple of `2^STFT_LEVELS`.
pub const STFT_PADDED_FRAMES: usize = 64;
pub const STFT_FFT: usize = 1024;
pub const STFT_HOP: usize = 512;
pub const CONDITIONING_WITH_ENVELOPE: usize = 37;
pub const CONDITIONING_WITHOUT_ENVELOPE: usize = 36;

/// Filters start at 32 and double after every 3 layers.
pub fn channel_schedule(levels: usize) -> Vec<usize> {
    (0..levels).map(|i| 32 << (i / 3)).collect()
}

pub fn stft_config() -> SpectrogramConfig {
    SpectrogramConfig::new(STFT_FFT, STFT_HOP).expect("valid STFT-variant resolution")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    Stft,
    Wav,
    WavSpec,
    Multi,
    MultiNoEnv,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::Stft,
        ModelVariant::Wav,
        ModelVariant::WavSpec,
        ModelVariant::Multi,
        ModelVariant::MultiNoEnv,
    ];

    /// Objective the variant trains with. The STFT variant applies it to
    /// magnitude frames instead of samples.
    pub fn loss(self) -> LossKind {
        match self {
            ModelVariant::Stft | ModelVariant::Wav => LossKind::Recon,
            ModelVariant::WavSpec => LossKind::WavSpec,
            ModelVariant::Multi | ModelVariant::MultiNoEnv => LossKind::Multi,
        }
    }

    pub fn include_envelope(self) -> bool {
        self != ModelVariant::MultiNoEnv
    }

    pub fn conditioning_channels(self) -> usize {
        if self.include_envelope() {
            CONDITIONING_WITH_ENVELOPE
        } else {
            CONDITIONING_WITHOUT_ENVELOPE
        }
    }

    pub fn output_domain(self) -> OutputDomain {
        match self {
            ModelVariant::Stft => OutputDomain::Magnitude,
            _ => OutputDomain::Waveform,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Stft => "STFT",
            ModelVariant::Wav => "WAV",
            ModelVariant::WavSpec => "WAVSPEC",
            ModelVariant::Multi => "MULTI",
            ModelVariant::MultiNoEnv => "MULTI_NOENV",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            ModelVariant::Stft => 0,
            ModelVariant::Wav => 1,
            ModelVariant::WavSpec => 2,
            ModelVariant::Multi => 3,
            ModelVariant::MultiNoEnv => 4,
        }
    }

    pub(crate) fn from_code(code: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.code() == code)
            .ok_or_else(|| Error::format("checkpoint", format!("unknown variant code {code}")))
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_uppercase().replace(['-', ' '], "_");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown model variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputDomain {
    /// One channel through tanh, one value per sample.
    Waveform,
    /// `fft/2 + 1` channels through softplus, one column per STFT frame.
    Magnitude,
}

/// Hyperparameters that fix the graph and the parameter shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveUNetConfig {
    pub variant: ModelVariant,
    /// Encoder output channels, one entry per level.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub conditioning_channels: usize,
    /// Length the network runs at; divisible by `2^levels`.
    pub padded_len: usize,
    /// Length of the conditioning input and of the cropped output, in
    /// samples for waveform models and in frames for magnitude models.
    pub nominal_len: usize,
    pub output_channels: usize,
}

impl WaveUNetConfig {
    /// The full-size network for `variant`.
    pub fn for_variant(variant: ModelVariant) -> Self {
        match variant.output_domain() {
            OutputDomain::Waveform => Self {
                variant,
                channels: channel_schedule(ENCODER_LEVELS),
                kernel: KERNEL,
                conditioning_channels: variant.conditioning_channels(),
                padded_len: PADDED_LEN,
                nominal_len: SEGMENT_LEN,
                output_channels: 1,
            },
            OutputDomain::Magnitude => {
                let cfg = stft_config();
                Self {
                    variant,
                    channels: channel_schedule(STFT_LEVELS),
                    kernel: KERNEL,
                    conditioning_channels: variant.conditioning_channels(),
                    padded_len: STFT_PADDED_FRAMES,
                    nominal_len: cfg.frame_count(SEGMENT_LEN),
                    output_channels: cfg.bins(),
                }
            }
        }
    }

    pub fn levels(&self) -> usize {
        self.channels.len()
    }

    pub fn output_domain(&self) -> OutputDomain {
        self.variant.output_domain()
    }

    pub fn bottleneck_len(&self) -> usize {
        self.padded_len >> self.levels()
    }

    /// Zeros added before the nominal signal; the remainder goes after it.
    pub fn pad_left(&self) -> usize {
        (self.padded_len - self.nominal_len) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        if levels == 0 || self.channels.contains(&0) {
            return Err(Error::invalid("network needs at least one non-empty level"));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::invalid("kernel length must be odd"));
        }
        if self.padded_len % (1 << levels) != 0 || self.padded_len >> levels == 0 {
            return Err(Error::invalid(format!(
                "padded length {} is not a positive multiple of 2^{levels}",
                self.padded_len
            )));
        }
        if self.nominal_len == 0 || self.nominal_len > self.padded_len {
            return Err(Error::invalid("nominal length must be in 1..=padded length"));
        }
        if self.conditioning_channels == 0 || self.output_channels == 0 {
            return Err(Error::invalid("channel counts must be positive"));
        }
        Ok(())
    }

    /// Parameter shapes in graph order: encoder weight/bias per level,
    /// decoder weight/bias from the deepest level up, then the head.
    pub fn parameter_shapes(&self) -> Vec<Vec<usize>> {
        let k = self.kernel;
        let levels = self.levels();
        let mut shapes = Vec::with_capacity(4 * levels + 2);
        let mut c_in = self.conditioning_channels;
        for &c in &self.channels {
            shapes.push(vec![c, c_in, k]);
            shapes.push(vec![c]);
            c_in = c;
        }
        for level in (1..=levels).rev() {
            let below = self.skip_channels(level - 1);
            let out = self.decoder_channels(level - 1);
            let upsampled = if level == levels {
                self.channels[levels - 1]
            } else {
                self.decoder_channels(level)
            };
            shapes.push(vec![out, upsampled + below, k]);
            shapes.push(vec![out]);
        }
        shapes.push(vec![self.output_channels, self.decoder_channels(0), 1]);
        shapes.push(vec![self.output_channels]);
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }

    /// Channels of the skip feeding decoder output `level` (0 = input).
    fn skip_channels(&self, level: usize) -> usize {
        if level == 0 {
            self.conditioning_channels
        } else {
            self.channels[level - 1]
        }
    }

    /// Decoder output channels at `level`: mirrors the encoder, with the
    /// top level matching the first encoder layer.
    fn decoder_channels(&self, level: usize) -> usize {
        if level == 0 {
            self.channels[0]
        } else {
            self.channels[level - 1]
        }
    }

    /// Largest distance, in nominal-length steps, over which one input
    /// step can influence one output step.
    pub fn receptive_radius(&self) -> usize {
        let half = self.kernel / 2;
        let levels = self.levels();
        // Encoder conv at level i reaches `half` steps of spacing 2^(i-1);
        // decoder upsampling reaches one step of 2^i and its conv `half`
        // steps of 2^(i-1); stride alignment adds at most 2^levels.
        let per_level: usize = (1..=levels)
            .map(|i| 2 * half * (1 << (i - 1)) + (1 << i))
            .sum();
        per_level + (1 << levels)
    }
}
