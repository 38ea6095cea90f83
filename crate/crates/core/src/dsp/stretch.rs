//! Pitch-preserving time stretch with a phase vocoder and identity phase locking.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::stft::{reflect_pad, uncenter, FrameAnalyzer, SpectrogramConfig, SpectrogramLayout};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const STRETCH_FFT: usize = 2048;
pub const STRETCH_HOP: usize = 512;
pub const MIN_RATIO: f64 = 0.5;
pub const MAX_RATIO: f64 = 2.0;

/// Speeds playback up by `ratio` without changing pitch. The output holds
/// `round(len / ratio)` samples.
pub fn time_stretch(audio: &AudioBuffer, ratio: f64) -> Result<AudioBuffer> {
    if !(MIN_RATIO..=MAX_RATIO).contains(&ratio) {
        return Err(Error::invalid(format!(
            "stretch ratio {ratio} outside [{MIN_RATIO}, {MAX_RATIO}]"
        )));
    }
    let config = SpectrogramConfig::new(STRETCH_FFT, STRETCH_HOP)?;
    let n = config.fft_size;
    let bins = config.bins();
    let synthesis_hop = config.hop_size as f64;
    let analysis_hop = synthesis_hop * ratio;

    let out_len = (audio.len() as f64 / ratio).round() as usize;
    if out_len == 0 {
        return Err(Error::EmptySignal);
    }
    let out_layout = SpectrogramLayout::for_signal(config, out_len, audio.sample_rate());
    let frames = out_layout.frames;

    let padded = reflect_pad(audio.samples(), config.pad());
    let analyzer = FrameAnalyzer::new(config);
    let positions: Vec<usize> = (0..frames)
        .map(|t| (t as f64 * analysis_hop).round() as usize)
        .collect();
    let analysis: Vec<Vec<Complex64>> = positions
        .iter()
        .map(|&p| {
            let end = (p + n).min(padded.len());
            let chunk = if p < padded.len() { &padded[p..end] } else { &[][..] };
            analyzer.analyze_padded(chunk, 1)
        })
        .collect();

    let omega: Vec<f64> = (0..bins).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let mut out_phase: Vec<f64> = analysis[0].iter().map(|z| z.arg()).collect();
    let mut spectra = Vec::with_capacity(frames * bins);
    spectra.extend(analysis[0].iter().copied());

    for t in 1..frames {
        let prev = &analysis[t - 1];
        let cur = &analysis[t];
        let hop_a = (positions[t] - positions[t - 1]) as f64;
        let mags: Vec<f64> = cur.iter().map(|z| z.norm()).collect();
        let phases: Vec<f64> = cur.iter().map(|z| z.arg()).collect();
        let peaks = find_peaks(&mags);

        let mut next_phase = vec![0.0; bins];
        for &p in &peaks {
            let advance = if hop_a > 0.0 {
                let deviation = wrap(phases[p] - prev[p].arg() - omega[p] * hop_a);
                (omega[p] + deviation / hop_a) * synthesis_hop
            } else {
                omega[p] * synthesis_hop
            };
            next_phase[p] = wrap(out_phase[p] + advance);
        }
        lock_to_peaks(&peaks, &phases, &mut next_phase);

        spectra.extend(
            mags.iter()
                .zip(&next_phase)
                .map(|(&m, &ph)| Complex64::from_polar(m, ph)),
        );
        out_phase = next_phase;
    }

    let signal = analyzer.synthesize_padded(&spectra, frames);
    AudioBuffer::new(uncenter(&signal, out_layout), audio.sample_rate())
}

/// Bins that exceed their two neighbours on each side. Never empty.
fn find_peaks(mags: &[f64]) -> Vec<usize> {
    let n = mags.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&k| {
            let lo = k.saturating_sub(2);
            let hi = (k + 2).min(n - 1);
            (lo..=hi).all(|j| j == k || mags[k] > mags[j])
        })
        .collect();
    if peaks.is_empty() {
        peaks.push(0);
    }
    peaks
}

/// Gives every non-peak bin the phase offset it had from its nearest peak.
fn lock_to_peaks(peaks: &[usize], phases: &[f64], out: &mut [f64]) {
    let mut region_start = 0;
    for (i, &p) in peaks.iter().enumerate() {
        let region_end = match peaks.get(i + 1) {
            Some(&next) => (p + next) / 2 + 1,
            None => out.len(),
        };
        for k in region_start..region_end {
            if k != p {
                out[k] = out[p] + phases[k] - phases[p];
            }
        }
        region_start = region_end;
    }
}

fn wrap(phase: f64) -> f64 {
    (phase + PI).rem_euclid(2.0 * PI) - PI
}
