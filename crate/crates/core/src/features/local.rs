//! Frame-rate rhythm curves and the amplitude envelope, plus their
//! upsampling to one value per sample.

use crate::audio::AudioBuffer;
use crate::dsp::iir::BandFilters;
use crate::dsp::spline_interpolate;
use crate::dsp::stft::reflect_pad;
use crate::error::Result;

use super::{analysis_config, SILENCE_FLOOR};

/// A band whose peak flux is below this fraction of the loudest band's peak
/// is scaled against that floor instead of its own maximum, so leakage from
/// another instrument does not get stretched to full scale.
pub const ACTIVATION_FLOOR: f64 = 0.25;

/// Kick, snare and hi-hat onset curves at frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BandActivations {
    pub kick: Vec<f64>,
    pub snare: Vec<f64>,
    pub hihat: Vec<f64>,
}

impl BandActivations {
    pub fn bands(&self) -> [&[f64]; 3] {
        [&self.kick, &self.snare, &self.hihat]
    }

    pub fn frames(&self) -> usize {
        self.kick.len()
    }
}

/// Frames between the two spectra being differenced. At hop 512 a lag of
/// two compares non-overlapping windows, so a short burst registers about
/// as strongly wherever it falls between frame centres.
pub const FLUX_LAG: usize = 2;

/// Magnitudes of [`FLUX_LAG`] extra frames before the signal followed by
/// the regular centred frames. The extra frames and the left padding wrap
/// around to the end of the signal, as for a loop; the right side
/// reflects.
fn looped_magnitudes(samples: &[f64]) -> Vec<f64> {
    let cfg = analysis_config();
    let (pad, hop) = (cfg.pad(), cfg.hop_size);
    let n = samples.len();
    let lead = pad + FLUX_LAG * hop;
    let mut padded: Vec<f64> = (0..lead).map(|i| samples[(n * (lead / n + 1) + i - lead) % n]).collect();
    let right = reflect_pad(samples, pad);
    padded.extend_from_slice(&right[pad..]);
    crate::dsp::stft::FrameAnalyzer::new(cfg)
        .analyze_padded(&padded, cfg.frame_count(n) + FLUX_LAG)
        .iter()
        .map(|z| z.norm())
        .collect()
}

/// Rectified flux of each frame against the frame `lag` hops earlier; the
/// first `lag` frames of `magnitudes` are references only.
fn lagged_flux(magnitudes: &[f64], bins: usize, lag: usize) -> Vec<f64> {
    let frames: Vec<&[f64]> = magnitudes.chunks_exact(bins).collect();
    (lag..frames.len())
        .map(|t| frames[t].iter().zip(frames[t - lag]).map(|(m, p)| (m - p).max(0.0)).sum())
        .collect()
}

/// Band-limited spectral flux through the low, mid and high analysis
/// filters.
pub fn extract_band_activations(audio: &AudioBuffer) -> Result<BandActivations> {
    let filters = BandFilters::for_rate(audio.sample_rate())?;
    let bands = filters.split(audio.samples());
    activations_from_bands(&bands)
}

pub(crate) fn activations_from_bands(bands: &[Vec<f64>; 3]) -> Result<BandActivations> {
    let bins = analysis_config().bins();
    let flux: Vec<Vec<f64>> = bands
        .iter()
        .map(|band| {
            lagged_flux(&looped_magnitudes(band), bins, FLUX_LAG)
        })
        .collect();
    let peaks: Vec<f64> = flux.iter().map(|f| f.iter().fold(0.0, |m: f64, v| m.max(*v))).collect();
    let loudest = peaks.iter().fold(0.0f64, |m, v| m.max(*v));
    let scale = |f: Vec<f64>, peak: f64| -> Vec<f64> {
        if loudest <= SILENCE_FLOOR {
            return vec![0.0; f.len()];
        }
        let denom = peak.max(ACTIVATION_FLOOR * loudest);
        f.into_iter().map(|v| (v / denom).clamp(0.0, 1.0)).collect()
    };
    let mut it = flux.into_iter().zip(peaks);
    let mut next = || {
        let (f, p) = it.next().expect("three bands");
        scale(f, p)
    };
    Ok(BandActivations {
        kick: next(),
        snare: next(),
        hihat: next(),
    })
}

/// Frame RMS over the analysis grid, scaled so the loudest frame is 1.
pub fn extract_envelope(audio: &AudioBuffer) -> Vec<f64> {
    envelope_of(audio.samples())
}

pub(crate) fn envelope_of(samples: &[f64]) -> Vec<f64> {
    let cfg = analysis_config();
    let padded = reflect_pad(samples, cfg.pad());
    let rms: Vec<f64> = (0..cfg.frame_count(samples.len()))
        .map(|t| {
            let frame = &padded[t * cfg.hop_size..t * cfg.hop_size + cfg.fft_size];
            (frame.iter().map(|x| x * x).sum::<f64>() / cfg.fft_size as f64).sqrt()
        })
        .collect();
    let peak = rms.iter().fold(0.0f64, |m, v| m.max(*v));
    if peak <= SILENCE_FLOOR {
        return vec![0.0; rms.len()];
    }
    rms.into_iter().map(|v| (v / peak).min(1.0)).collect()
}

/// Spline through frame centres (`t · hop`), evaluated at every sample and
/// clamped to `[0, 1]`.
pub fn localize(frames: &[f64], segment_length: usize) -> Result<Vec<f64>> {
    let hop = analysis_config().hop_size as f64;
    let positions: Vec<f64> = (0..frames.len()).map(|t| t as f64 * hop).collect();
    let mut out = spline_interpolate(frames, &positions, segment_length)?;
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const SR: u32 = 16_000;

    fn buffer(samples: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(samples, SR).unwrap()
    }

    fn kick(len: usize) -> Vec<f64> {
        let mut phase = 0.0;
        (0..len)
            .map(|i| {
                let t = i as f64 / SR as f64;
                let f = 50.0 + 70.0 * (-t / 0.03).exp();
                phase += 2.0 * PI * f / SR as f64;
                phase.sin() * (-t / 0.08).exp()
            })
            .collect()
    }

    #[test]
    fn silence_gives_zero_curves() {
        let a = extract_band_activations(&buffer(vec![0.0; 8000])).unwrap();
        assert!(a.bands().iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert!(extract_envelope(&buffer(vec![0.0; 8000])).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kick_lands_in_the_low_band() {
        let a = extract_band_activations(&buffer(kick(16000))).unwrap();
        let argmax = a
            .kick
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0;
        assert!(argmax < 2, "argmax {argmax}");
        let hi = a.hihat.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(hi < 0.3, "high band peak {hi}");
    }

    #[test]
    fn hihat_burst_peaks_in_the_high_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let onset = 8000;
        let mut x = vec![0.0; 16000];
        let filters = BandFilters::for_rate(SR).unwrap();
        let noise: Vec<f64> = (0..480).map(|_| rng.random_range(-1.0..1.0)).collect();
        let burst = crate::dsp::iir::filter_samples(&noise, &filters.high);
        x[onset..onset + 480].copy_from_slice(&burst);
        let a = extract_band_activations(&buffer(x)).unwrap();
        let frame = (onset as f64 / 512.0).round() as usize;
        let near = a.hihat[frame - 1..=frame + 1]
            .iter()
            .fold(0.0f64, |m, v| m.max(*v));
        assert!(near >= 0.9, "{near}");
    }

    #[test]
    fn constant_signal_has_flat_unit_envelope() {
        let env = extract_envelope(&buffer(vec![1.0; 10000]));
        assert!(env.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ramped_noise_envelope_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 29538;
        let x: Vec<f64> = (0..n)
            .map(|i| (i as f64 / n as f64) * rng.random_range(-1.0..1.0))
            .collect();
        let env = extract_envelope(&buffer(x));
        let inversions = env.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(inversions <= 2, "{inversions} inversions");
    }

    #[test]
    fn localize_lengths_and_constants() {
        let out = localize(&[0.5; 58], 29538).unwrap();
        assert_eq!(out.len(), 29538);
        assert!(out.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn localize_hits_knots_and_stays_in_range(
            frames in prop::collection::vec(0.0f64..=1.0, 4..40)
        ) {
            let len = (frames.len() - 1) * 512 + 100;
            let out = localize(&frames, len).unwrap();
            prop_assert_eq!(out.len(), len);
            for (t, &v) in frames.iter().enumerate() {
                prop_assert!((out[t * 512] - v).abs() < 1e-9);
            }
            prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn activations_are_deterministic_and_bounded(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..6000).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = extract_band_activations(&buffer(x.clone())).unwrap();
            let b = extract_band_activations(&buffer(x)).unwrap();
            prop_assert_eq!(&a, &b);
            for band in a.bands() {
                prop_assert!(band.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
