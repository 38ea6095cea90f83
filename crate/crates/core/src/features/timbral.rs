//! Seven timbral proxy descriptors per analysis band.
//!
//! Each descriptor is computed on the frames of one band-filtered signal and
//! averaged over the frames that are within 60 dB of the loudest one. A
//! silent band yields zeros.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::dsp::iir::BandFilters;
use crate::dsp::stft::{hann, reflect_pad, stft_magnitudes};
use crate::error::Result;

use super::norm::NormStats;
use super::{analysis_config, SILENCE_FLOOR};

pub const DESCRIPTORS: [&str; 7] = [
    "hardness",
    "depth",
    "brightness",
    "roughness",
    "boominess",
    "warmth",
    "sharpness",
];
pub const BANDS: [&str; 3] = ["low", "mid", "high"];
pub const TIMBRAL_LEN: usize = 21;

/// Onset analysis window.
pub const ONSET_WINDOW_SECS: f64 = 0.020;
pub const ROUGHNESS_HZ: (f64, f64) = (20.0, 150.0);
pub const BOOM_HZ: f64 = 200.0;
pub const WARMTH_HZ: (f64, f64) = (100.0, 600.0);
pub const SHARPNESS_EXPONENT: f64 = 1.25;
/// Frames quieter than this fraction of the loudest frame's energy are
/// left out of the average.
const ACTIVE_FRAME: f64 = 1e-6;

/// Index of `descriptor` in `band` inside the 21-value vector.
pub fn timbral_index(band: usize, descriptor: usize) -> usize {
    band * DESCRIPTORS.len() + descriptor
}

/// `"<band>_<descriptor>"` for each of the 21 entries.
pub fn timbral_names() -> Vec<String> {
    BANDS
        .iter()
        .flat_map(|b| DESCRIPTORS.iter().map(move |d| format!("{b}_{d}")))
        .collect()
}

/// Raw descriptors when `stats` is `None`; otherwise min-max normalized and
/// clipped to `[0, 1]`.
pub fn extract_timbral(audio: &AudioBuffer, stats: Option<&NormStats>) -> Result<[f64; 21]> {
    let filters = BandFilters::for_rate(audio.sample_rate())?;
    let bands = filters.split(audio.samples());
    let raw = timbral_from_bands(&bands, audio.sample_rate());
    Ok(match stats {
        Some(s) => s.normalize(&raw),
        None => raw,
    })
}

pub(crate) fn timbral_from_bands(bands: &[Vec<f64>; 3], sample_rate: u32) -> [f64; 21] {
    let mut out = [0.0; 21];
    for (b, band) in bands.iter().enumerate() {
        let d = descriptors(band, sample_rate);
        out[b * 7..b * 7 + 7].copy_from_slice(&d);
    }
    out
}

/// The seven raw descriptors of one signal, in [`DESCRIPTORS`] order.
pub fn descriptors(samples: &[f64], sample_rate: u32) -> [f64; 7] {
    let cfg = analysis_config();
    let bins = cfg.bins();
    let bin_hz = cfg.bin_hz(sample_rate);
    let nyquist = sample_rate as f64 / 2.0;
    let mags = stft_magnitudes(samples, cfg).expect("non-empty signal");
    let energies: Vec<f64> = mags
        .chunks_exact(bins)
        .map(|f| f.iter().map(|m| m * m).sum())
        .collect();
    let loudest = energies.iter().fold(0.0f64, |m, v| m.max(*v));
    if loudest <= SILENCE_FLOOR {
        return [0.0; 7];
    }

    let hardness = onset_hardness(samples, sample_rate);
    let roughness = modulation_ratio(samples, sample_rate);

    let mut sums = [0.0; 7];
    let mut count = 0usize;
    for (t, frame) in mags.chunks_exact(bins).enumerate() {
        let energy = energies[t];
        if energy < ACTIVE_FRAME * loudest {
            continue;
        }
        count += 1;
        let mag_sum: f64 = frame.iter().sum();
        let (mut centroid, mut sharp, mut boom, mut warm) = (0.0, 0.0, 0.0, 0.0);
        for (k, &m) in frame.iter().enumerate() {
            let f = k as f64 * bin_hz;
            let rel = f / nyquist;
            centroid += rel * m;
            sharp += rel.powf(SHARPNESS_EXPONENT) * m;
            let p = m * m;
            if f < BOOM_HZ {
                boom += p;
            }
            if (WARMTH_HZ.0..=WARMTH_HZ.1).contains(&f) {
                warm += p;
            }
        }
        let brightness = centroid / mag_sum;
        sums[0] += hardness[t];
        sums[1] += 1.0 - brightness;
        sums[2] += brightness;
        sums[3] += roughness[t];
        sums[4] += boom / energy;
        sums[5] += warm / energy;
        sums[6] += sharp / mag_sum;
    }
    sums.map(|s| s / count as f64)
}

/// Centre sample range `[c - fft/2, c + fft/2)` of frame `t`, clipped.
fn frame_span(t: usize, len: usize) -> (usize, usize) {
    let cfg = analysis_config();
    let centre = t * cfg.hop_size;
    (centre.saturating_sub(cfg.pad()), (centre + cfg.pad()).min(len))
}

/// Per frame: steepest rise of the 20 ms running energy over a 20 ms lag,
/// relative to the largest running energy of the whole signal.
fn onset_hardness(samples: &[f64], sample_rate: u32) -> Vec<f64> {
    let cfg = analysis_config();
    let w = ((ONSET_WINDOW_SECS * sample_rate as f64).round() as usize).max(1);
    let mut energy = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    for i in 0..samples.len() {
        acc += samples[i] * samples[i];
        if i >= w {
            acc -= samples[i - w] * samples[i - w];
        }
        energy.push(acc.max(0.0) / w as f64);
    }
    let top = energy.iter().fold(0.0f64, |m, v| m.max(*v));
    (0..cfg.frame_count(samples.len()))
        .map(|t| {
            if top <= SILENCE_FLOOR {
                return 0.0;
            }
            let (a, b) = frame_span(t, samples.len());
            let rise = (a..b).fold(0.0f64, |r, n| {
                let before = if n >= w { energy[n - w] } else { 0.0 };
                r.max(energy[n] - before)
            });
            (rise / top).clamp(0.0, 1.0)
        })
        .collect()
}

/// Magnitude of the analytic signal.
fn analytic_envelope(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            continue;
        }
        if k < n.div_ceil(2) {
            *z *= 2.0;
        } else {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.norm() / n as f64).collect()
}

/// Per frame: share of the envelope's energy, DC included, that lies
/// between 20 and 150 Hz. Grows with modulation depth.
fn modulation_ratio(samples: &[f64], sample_rate: u32) -> Vec<f64> {
    let cfg = analysis_config();
    let n = cfg.fft_size;
    let env = analytic_envelope(samples);
    let padded = reflect_pad(&env, cfg.pad());
    let window = hann(n);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bin_hz = cfg.bin_hz(sample_rate);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    (0..cfg.frame_count(samples.len()))
        .map(|t| {
            let frame = &padded[t * cfg.hop_size..t * cfg.hop_size + n];
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(frame[k] * window[k], 0.0);
            }
            fft.process(&mut buf);
            let (mut band, mut total) = (0.0, 0.0);
            for (k, z) in buf[..=n / 2].iter().enumerate() {
                let f = k as f64 * bin_hz;
                let p = z.norm_sqr();
                total += p;
                if (ROUGHNESS_HZ.0..=ROUGHNESS_HZ.1).contains(&f) {
                    band += p;
                }
            }
            if total <= SILENCE_FLOOR * SILENCE_FLOOR {
                0.0
            } else {
                band / total
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::iir::{design_iir, filter_samples, FilterKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const SR: u32 = 16_000;
    const N: usize = 16_000;

    fn noise(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..N).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn lowpassed(x: &[f64], hz: f64, order: usize) -> Vec<f64> {
        let f = design_iir(FilterKind::LowPass1, hz, SR).unwrap();
        (0..order).fold(x.to_vec(), |acc, _| filter_samples(&acc, &f))
    }

    fn sine(f: f64, amp: f64) -> Vec<f64> {
        (0..N)
            .map(|i| amp * (2.0 * PI * f * i as f64 / SR as f64).sin())
            .collect()
    }

    fn mix(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    fn assert_strictly_increasing(name: &str, values: &[f64]) {
        assert!(
            values.windows(2).all(|w| w[1] > w[0]),
            "{name} not increasing: {values:?}"
        );
    }

    fn family(descriptor: usize, signals: Vec<Vec<f64>>) -> Vec<f64> {
        signals
            .iter()
            .map(|s| descriptors(s, SR)[descriptor])
            .collect()
    }

    #[test]
    fn names_are_band_major() {
        let names = timbral_names();
        assert_eq!(names.len(), 21);
        assert_eq!(names[timbral_index(0, 0)], "low_hardness");
        assert_eq!(names[timbral_index(2, 6)], "high_sharpness");
        assert_eq!(names[timbral_index(1, 2)], "mid_brightness");
    }

    #[test]
    fn silence_is_zero() {
        let a = AudioBuffer::silence(8000, SR).unwrap();
        assert_eq!(extract_timbral(&a, None).unwrap(), [0.0; 21]);
    }

    #[test]
    fn boominess_of_low_and_high_sines() {
        let low = descriptors(&sine(60.0, 0.8), SR)[4];
        let high = descriptors(&sine(2000.0, 0.8), SR)[4];
        assert!(low > 0.99, "{low}");
        assert!(high < 0.01, "{high}");
    }

    #[test]
    fn highpassed_noise_is_brighter_in_the_same_band() {
        let x = noise(1);
        let hp = design_iir(FilterKind::HighPass1, 3000.0, SR).unwrap();
        let bright = AudioBuffer::new(filter_samples(&x, &hp), SR).unwrap();
        let dark = AudioBuffer::new(lowpassed(&x, 500.0, 2), SR).unwrap();
        for band in 0..3 {
            let i = timbral_index(band, 2);
            let b = extract_timbral(&bright, None).unwrap()[i];
            let d = extract_timbral(&dark, None).unwrap()[i];
            assert!(b > d, "band {band}: {b} vs {d}");
        }
    }

    #[test]
    fn hardness_rises_with_sharper_attacks() {
        let base = noise(2);
        // The onset window is 20 ms; shorter attacks all read as maximal.
        let signals = [240.0, 160.0, 100.0, 60.0, 30.0]
            .iter()
            .map(|attack_ms| {
                let attack = attack_ms * 16.0;
                let mut x = vec![0.0; N];
                for start in [1000, 8500] {
                    for i in 0..6000 {
                        let ramp = (i as f64 / attack).min(1.0);
                        x[start + i] = ramp * base[start + i];
                    }
                }
                x
            })
            .collect();
        assert_strictly_increasing("hardness", &family(0, signals));
    }

    #[test]
    fn depth_brightness_sharpness_follow_cutoff() {
        let x = noise(3);
        let cutoffs = [200.0, 500.0, 1000.0, 2000.0, 4000.0];
        let signals: Vec<Vec<f64>> = cutoffs.iter().map(|&c| lowpassed(&x, c, 3)).collect();
        let mut depth = family(1, signals.clone());
        depth.reverse();
        assert_strictly_increasing("depth (falling cutoff)", &depth);
        assert_strictly_increasing("brightness", &family(2, signals.clone()));
        assert_strictly_increasing("sharpness", &family(6, signals));
    }

    #[test]
    fn roughness_follows_modulation_depth() {
        let signals = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|depth| {
                (0..N)
                    .map(|i| {
                        let t = i as f64 / SR as f64;
                        let am = 1.0 + depth * (2.0 * PI * 70.0 * t).sin();
                        0.4 * am * (2.0 * PI * 1000.0 * t).sin()
                    })
                    .collect()
            })
            .collect();
        assert_strictly_increasing("roughness", &family(3, signals));
    }

    #[test]
    fn energy_ratios_follow_mixing_weight() {
        let weights = [0.1, 0.3, 0.5, 0.7, 0.9];
        let boom = weights
            .iter()
            .map(|w| mix(&sine(60.0, *w), &sine(2000.0, 1.0 - w)))
            .collect();
        assert_strictly_increasing("boominess", &family(4, boom));
        let warm = weights
            .iter()
            .map(|w| mix(&sine(300.0, *w), &sine(3000.0, 1.0 - w)))
            .collect();
        assert_strictly_increasing("warmth", &family(5, warm));
    }

    #[test]
    fn normalized_values_are_clipped() {
        let stats = NormStats::fit(&[[0.0; 21], [1e-9; 21]]).unwrap();
        let a = AudioBuffer::new(noise(4), SR).unwrap();
        let v = extract_timbral(&a, Some(&stats)).unwrap();
        assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
