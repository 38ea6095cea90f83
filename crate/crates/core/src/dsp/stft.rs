//! Centered short-time Fourier transform and its least-squares inverse.
//!
//! Signals are reflect-padded by `fft_size / 2` on both sides, framed with a
//! periodic Hann window and transformed. The inverse overlap-adds windowed
//! frames and divides by the summed squared window, which makes it the
//! least-squares inverse of the forward transform.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpectrogramConfig {
    pub fft_size: usize,
    pub hop_size: usize,
}

impl SpectrogramConfig {
    pub fn new(fft_size: usize, hop_size: usize) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(Error::invalid(format!(
                "fft size {fft_size} is not a power of two"
            )));
        }
        if hop_size == 0 || hop_size > fft_size {
            return Err(Error::invalid(format!(
                "hop size {hop_size} must be in 1..={fft_size}"
            )));
        }
        Ok(Self { fft_size, hop_size })
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn pad(&self) -> usize {
        self.fft_size / 2
    }

    /// Frames produced for a signal of `len` samples under centering.
    pub fn frame_count(&self, len: usize) -> usize {
        (len + 2 * self.pad() - self.fft_size) / self.hop_size + 1
    }

    pub fn bin_hz(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.fft_size as f64
    }
}

/// Everything needed to interpret a frames × bins array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramLayout {
    pub config: SpectrogramConfig,
    pub frames: usize,
    pub signal_len: usize,
    pub sample_rate: u32,
}

impl SpectrogramLayout {
    pub fn for_signal(config: SpectrogramConfig, signal_len: usize, sample_rate: u32) -> Self {
        Self {
            config,
            frames: config.frame_count(signal_len),
            signal_len,
            sample_rate,
        }
    }

    pub fn bins(&self) -> usize {
        self.config.bins()
    }

    pub fn cells(&self) -> usize {
        self.frames * self.bins()
    }
}

/// Row-major frames × bins magnitudes and phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub layout: SpectrogramLayout,
    pub magnitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.layout.frames
    }

    pub fn bins(&self) -> usize {
        self.layout.bins()
    }

    pub fn frame_magnitudes(&self, frame: usize) -> &[f64] {
        let b = self.bins();
        &self.magnitudes[frame * b..(frame + 1) * b]
    }

    pub fn magnitude(&self, frame: usize, bin: usize) -> f64 {
        self.magnitudes[frame * self.bins() + bin]
    }

    pub fn complex(&self, frame: usize, bin: usize) -> Complex64 {
        let i = frame * self.bins() + bin;
        Complex64::from_polar(self.magnitudes[i], self.phases[i])
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Maps an index into a signal reflect-padded by `pad` onto the source index.
/// Reflection repeats as often as needed, so any signal length works.
pub fn reflect_index(padded_index: usize, pad: usize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let j = (padded_index as i64 - pad as i64).rem_euclid(period);
    if j >= len as i64 {
        (period - j) as usize
    } else {
        j as usize
    }
}

pub fn reflect_pad(signal: &[f64], pad: usize) -> Vec<f64> {
    (0..signal.len() + 2 * pad)
        .map(|i| signal[reflect_index(i, pad, signal.len())])
        .collect()
}

/// Windowed framing and FFT for one configuration.
pub struct FrameAnalyzer {
    config: SpectrogramConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FrameAnalyzer {
    pub fn new(config: SpectrogramConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            config,
            window: hann(config.fft_size),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        }
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// One-sided spectra of every frame of an already padded signal.
    /// Frame `t` starts at `t * hop`; samples past the end read as zero.
    pub fn analyze_padded(&self, padded: &[f64], frames: usize) -> Vec<Complex64> {
        let n = self.config.fft_size;
        let bins = self.config.bins();
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            let start = t * self.config.hop_size;
            for (k, slot) in buf.iter_mut().enumerate() {
                let x = padded.get(start + k).copied().unwrap_or(0.0);
                *slot = Complex64::new(x * self.window[k], 0.0);
            }
            self.forward.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        out
    }

    /// Least-squares overlap-add of one-sided spectra into a signal of
    /// `(frames - 1) * hop + fft_size` samples (no centering removed).
    pub fn synthesize_padded(&self, spectra: &[Complex64], frames: usize) -> Vec<f64> {
        let n = self.config.fft_size;
        let hop = self.config.hop_size;
        let bins = self.config.bins();
        let len = (frames.max(1) - 1) * hop + n;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            let frame = &spectra[t * bins..(t + 1) * bins];
            hermitian_fill(frame, &mut buf);
            self.inverse.process(&mut buf);
            let start = t * hop;
            for k in 0..n {
                let w = self.window[k];
                out[start + k] += w * buf[k].re / n as f64;
                norm[start + k] += w * w;
            }
        }
        for (o, w) in out.iter_mut().zip(&norm) {
            *o = if *w > 1e-10 { *o / w } else { 0.0 };
        }
        out
    }
}

/// Expands a one-sided spectrum into the full Hermitian-symmetric buffer.
fn hermitian_fill(one_sided: &[Complex64], full: &mut [Complex64]) {
    let n = full.len();
    let half = n / 2;
    full[..=half].copy_from_slice(&one_sided[..=half]);
    for k in 1..half {
        full[n - k] = one_sided[k].conj();
    }
}

pub fn stft(audio: &AudioBuffer, config: SpectrogramConfig) -> Result<Spectrogram> {
    stft_samples(audio.samples(), config, audio.sample_rate())
}

pub fn stft_samples(
    samples: &[f64],
    config: SpectrogramConfig,
    sample_rate: u32,
) -> Result<Spectrogram> {
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let layout = SpectrogramLayout::for_signal(config, samples.len(), sample_rate);
    let padded = reflect_pad(samples, config.pad());
    let spectra = FrameAnalyzer::new(config).analyze_padded(&padded, layout.frames);
    Ok(Spectrogram {
        layout,
        magnitudes: spectra.iter().map(|z| z.norm()).collect(),
        phases: spectra.iter().map(|z| z.arg()).collect(),
    })
}

/// Magnitudes only; avoids the phase computation.
pub fn stft_magnitudes(samples: &[f64], config: SpectrogramConfig) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let frames = config.frame_count(samples.len());
    let padded = reflect_pad(samples, config.pad());
    Ok(FrameAnalyzer::new(config)
        .analyze_padded(&padded, frames)
        .iter()
        .map(|z| z.norm())
        .collect())
}

pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer> {
    let layout = spec.layout;
    if layout.frames == 0 {
        return Err(Error::invalid("spectrogram has no frames"));
    }
    if spec.magnitudes.len() != layout.cells() || spec.phases.len() != layout.cells() {
        return Err(Error::shape(
            "istft",
            format!(
                "expected {} cells, got {} magnitudes / {} phases",
                layout.cells(),
                spec.magnitudes.len(),
                spec.phases.len()
            ),
        ));
    }
    let spectra: Vec<Complex64> = spec
        .magnitudes
        .iter()
        .zip(&spec.phases)
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    let padded = FrameAnalyzer::new(layout.config).synthesize_padded(&spectra, layout.frames);
    AudioBuffer::new(uncenter(&padded, layout), layout.sample_rate)
}

/// Removes the centering pad, zero-filling if the frames fall short.
pub(crate) fn uncenter(padded: &[f64], layout: SpectrogramLayout) -> Vec<f64> {
    let pad = layout.config.pad();
    (0..layout.signal_len)
        .map(|i| padded.get(pad + i).copied().unwrap_or(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(freq: f64, len: usize, sr: f64) -> Vec<f64> {
        (0..len)
            .map(|n| (2.0 * PI * freq * n as f64 / sr).sin())
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(SpectrogramConfig::new(1000, 512).is_err());
        assert!(SpectrogramConfig::new(1024, 0).is_err());
        assert!(SpectrogramConfig::new(1024, 2048).is_err());
        assert!(SpectrogramConfig::new(1024, 1024).is_ok());
    }

    #[test]
    fn empty_signal_is_an_error() {
        let cfg = SpectrogramConfig::new(64, 16).unwrap();
        assert!(matches!(stft_samples(&[], cfg, 16000), Err(Error::EmptySignal)));
    }

    #[test]
    fn zeros_give_zero_magnitudes() {
        let cfg = SpectrogramConfig::new(256, 64).unwrap();
        let spec = stft_samples(&vec![0.0; 1000], cfg, 16000).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn bin_spacing_at_16k() {
        let cfg = SpectrogramConfig::new(1024, 512).unwrap();
        assert_eq!(cfg.bin_hz(16000), 15.625);
    }

    #[test]
    fn frame_count_for_one_bar() {
        let cfg = SpectrogramConfig::new(1024, 512).unwrap();
        assert_eq!(cfg.frame_count(29538), 58);
    }

    #[test]
    fn sine_peak_bin_matches_direct_dft() {
        let cfg = SpectrogramConfig::new(1024, 512).unwrap();
        let x = sine(440.0, 16000, 16000.0);
        let spec = stft_samples(&x, cfg, 16000).unwrap();
        // Oracle: brute-force DFT of one interior windowed frame.
        let w = hann(1024);
        let frame = 10;
        let start = frame * 512 - 512;
        let direct: Vec<f64> = (0..513)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..1024 {
                    let ph = -2.0 * PI * (k * n) as f64 / 1024.0;
                    re += x[start + n] * w[n] * ph.cos();
                    im += x[start + n] * w[n] * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect();
        for (a, b) in spec.frame_magnitudes(frame).iter().zip(&direct) {
            assert!((a - b).abs() < 1e-8);
        }
        let expected = (440.0_f64 * 1024.0 / 16000.0).round() as usize;
        assert_eq!(expected, 28);
        for t in 1..spec.frames() - 1 {
            let mags = spec.frame_magnitudes(t);
            let argmax = (0..mags.len())
                .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
                .unwrap();
            assert_eq!(argmax, expected);
        }
    }

    #[test]
    fn round_trip_white_noise() {
        let cfg = SpectrogramConfig::new(1024, 512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..20000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let audio = AudioBuffer::new(x.clone(), 16000).unwrap();
        let y = istft(&stft(&audio, cfg).unwrap()).unwrap();
        assert_eq!(y.len(), x.len());
        let err = x[512..x.len() - 512]
            .iter()
            .zip(&y.samples()[512..x.len() - 512])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn round_trip_sine_snr() {
        let cfg = SpectrogramConfig::new(1024, 512).unwrap();
        let x = sine(440.0, 16000, 16000.0);
        let audio = AudioBuffer::new(x.clone(), 16000).unwrap();
        let y = istft(&stft(&audio, cfg).unwrap()).unwrap();
        let (mut sig, mut noise) = (0.0, 0.0);
        for i in 512..x.len() - 512 {
            sig += x[i] * x[i];
            noise += (x[i] - y.samples()[i]).powi(2);
        }
        let snr = 10.0 * (sig / noise.max(1e-300)).log10();
        assert!(snr > 100.0, "snr {snr}");
    }

    #[test]
    fn zero_spectrogram_inverts_to_zero() {
        let cfg = SpectrogramConfig::new(256, 64).unwrap();
        let layout = SpectrogramLayout::for_signal(cfg, 2000, 16000);
        let spec = Spectrogram {
            layout,
            magnitudes: vec![0.0; layout.cells()],
            phases: vec![0.0; layout.cells()],
        };
        let y = istft(&spec).unwrap();
        assert!(y.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn reflect_index_matches_numpy_reflect() {
        // numpy.pad([0,1,2,3], 3, mode="reflect") -> 3 2 1 0 1 2 3 2 1 0
        let idx: Vec<usize> = (0..10).map(|i| reflect_index(i, 3, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }
}
