//! Fixed handcrafted audio embedding used in place of a learned one.

use crate::audio::AudioBuffer;
use crate::dsp::stft::stft_magnitudes;
use crate::error::{Error, Result};
use crate::features::hpcp::hpcp_of;
use crate::features::{analysis_config, SILENCE_FLOOR};

/// Identifier written into every report that uses the embedding.
pub const EMBEDDING_SPEC: &str = "FD-handcrafted v1 (20 log-mel means, 20 log-mel stds, 12 HPCP, onset rate)";
pub const EMBEDDING_DIM: usize = 53;
pub const MEL_BANDS: usize = 64;
pub const POOLED_BANDS: usize = 20;
pub const LOG_FLOOR_DB: f64 = -80.0;
/// Flux peaks below this fraction of the loudest are not counted as onsets.
pub const ONSET_THRESHOLD: f64 = 0.3;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters, `bands × bins`, spanning 0 Hz to Nyquist.
pub fn mel_filterbank(bands: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / fft_size as f64;
    (0..bands)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Weights reducing `from` bands to `to` overlapping triangles with evenly
/// spaced centres; each row sums to 1.
pub fn pooling_matrix(from: usize, to: usize) -> Vec<Vec<f64>> {
    let spacing = (from - 1) as f64 / (to - 1) as f64;
    (0..to)
        .map(|j| {
            let centre = j as f64 * spacing;
            let row: Vec<f64> = (0..from)
                .map(|i| (1.0 - (i as f64 - centre).abs() / spacing).max(0.0))
                .collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|w| w / sum).collect()
        })
        .collect()
}

/// 53 values: pooled log-mel means and standard deviations over frames,
/// the HPCP and onsets per second.
pub fn embed(audio: &AudioBuffer) -> Result<Vec<f64>> {
    let sr = audio.sample_rate();
    if sr != crate::audio::CANONICAL_RATE {
        return Err(Error::invalid(format!("embedding expects 16 kHz audio, got {sr} Hz")));
    }
    let cfg = analysis_config();
    let bins = cfg.bins();
    let mags = stft_magnitudes(audio.samples(), cfg)?;
    let frames = mags.len() / bins;
    let mel = mel_filterbank(MEL_BANDS, cfg.fft_size, sr);
    let pool = pooling_matrix(MEL_BANDS, POOLED_BANDS);

    let mut pooled = vec![vec![0.0; frames]; POOLED_BANDS];
    for (t, frame) in mags.chunks_exact(bins).enumerate() {
        let db: Vec<f64> = mel
            .iter()
            .map(|filter| {
                let power: f64 = filter.iter().zip(frame).map(|(w, m)| w * m * m).sum();
                (10.0 * power.max(1e-300).log10()).max(LOG_FLOOR_DB)
            })
            .collect();
        for (row, weights) in pooled.iter_mut().zip(&pool) {
            row[t] = weights.iter().zip(&db).map(|(w, d)| w * d).sum();
        }
    }

    let mut out = Vec::with_capacity(EMBEDDING_DIM);
    let stats: Vec<(f64, f64)> = pooled
        .iter()
        .map(|row| {
            let mean = row.iter().sum::<f64>() / frames as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / frames as f64;
            (mean, var.sqrt())
        })
        .collect();
    out.extend(stats.iter().map(|s| s.0));
    out.extend(stats.iter().map(|s| s.1));
    out.extend(hpcp_of(audio.samples(), sr));
    out.push(onset_rate(&mags, bins, audio.duration_secs()));
    Ok(out)
}

/// Local maxima of full-band spectral flux above [`ONSET_THRESHOLD`] of the
/// largest, per second.
fn onset_rate(mags: &[f64], bins: usize, seconds: f64) -> f64 {
    let frames: Vec<&[f64]> = mags.chunks_exact(bins).collect();
    let mut flux = vec![0.0; frames.len()];
    for t in 1..frames.len() {
        flux[t] = frames[t]
            .iter()
            .zip(frames[t - 1])
            .map(|(a, b)| (a - b).max(0.0))
            .sum();
    }
    let max = flux.iter().fold(0.0f64, |m, v| m.max(*v));
    if max <= SILENCE_FLOOR || seconds <= 0.0 {
        return 0.0;
    }
    let count = (1..flux.len())
        .filter(|&t| {
            let next = flux.get(t + 1).copied().unwrap_or(0.0);
            flux[t] >= ONSET_THRESHOLD * max && flux[t] > flux[t - 1] && flux[t] >= next
        })
        .count();
    count as f64 / seconds
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn buffer(x: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(x, 16_000).unwrap()
    }

    fn distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn dimension_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..16000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let a = embed(&buffer(x.clone())).unwrap();
        assert_eq!(a.len(), EMBEDDING_DIM);
        assert_eq!(a, embed(&buffer(x)).unwrap());
    }

    #[test]
    fn silence_is_well_defined() {
        let e = embed(&buffer(vec![0.0; 16000])).unwrap();
        assert!(e.iter().all(|v| v.is_finite()));
        assert!(e[..POOLED_BANDS].iter().all(|&v| (v - LOG_FLOOR_DB).abs() < 1e-9));
        assert_eq!(e[EMBEDDING_DIM - 1], 0.0);
    }

    #[test]
    fn noise_and_sine_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..16000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let sine: Vec<f64> = (0..16000)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        let d = distance(&embed(&buffer(noise)).unwrap(), &embed(&buffer(sine)).unwrap());
        assert!(d > 1.0, "{d}");
    }

    #[test]
    fn pooling_rows_are_normalized() {
        for row in pooling_matrix(MEL_BANDS, POOLED_BANDS) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let fb = mel_filterbank(MEL_BANDS, 1024, 16_000);
        assert_eq!(fb.len(), MEL_BANDS);
        assert!(fb.iter().all(|f| f.iter().any(|&w| w > 0.0)));
    }

    #[test]
    fn click_train_onset_rate() {
        let mut x = vec![0.0; 32000];
        for k in 0..8 {
            x[1000 + k * 4000] = 1.0;
        }
        let e = embed(&buffer(x)).unwrap();
        let rate = e[EMBEDDING_DIM - 1];
        assert!((rate - 4.0).abs() <= 0.5, "{rate}");
    }
}
