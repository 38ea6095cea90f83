//! Griffin-Lim phase retrieval.
//!
//! Iterates in the padded frame domain (frames laid end to end without the
//! reflect constraint), where the least-squares inverse makes the classic
//! non-increasing error guarantee hold. The centering pad is stripped from the
//! final estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stft::{uncenter, FrameAnalyzer, SpectrogramLayout};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 60;

#[derive(Debug, Clone)]
pub struct GriffinLimTrace {
    pub audio: AudioBuffer,
    /// Spectral convergence after each iteration, measured over the full
    /// two-sided spectrum: `‖|STFT(y)| − M‖_F / ‖M‖_F`.
    pub errors: Vec<f64>,
}

pub fn griffin_lim(
    magnitudes: &[f64],
    layout: SpectrogramLayout,
    iterations: usize,
    seed: u64,
) -> Result<AudioBuffer> {
    griffin_lim_traced(magnitudes, layout, iterations, seed).map(|t| t.audio)
}

pub fn griffin_lim_traced(
    magnitudes: &[f64],
    layout: SpectrogramLayout,
    iterations: usize,
    seed: u64,
) -> Result<GriffinLimTrace> {
    if iterations == 0 {
        return Err(Error::invalid("griffin-lim needs at least one iteration"));
    }
    if magnitudes.len() != layout.cells() {
        return Err(Error::shape(
            "griffin_lim",
            format!("{} magnitudes for {} cells", magnitudes.len(), layout.cells()),
        ));
    }
    if magnitudes.iter().any(|&m| m < 0.0 || !m.is_finite()) {
        return Err(Error::invalid("magnitudes must be finite and nonnegative"));
    }

    let bins = layout.bins();
    let weights = bin_weights(bins);
    let target_norm = weighted_norm(magnitudes, &weights, bins);
    let analyzer = FrameAnalyzer::new(layout.config);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimate: Vec<Complex64> = magnitudes
        .iter()
        .map(|&m| Complex64::from_polar(m, rng.random_range(-PI..PI)))
        .collect();

    let mut errors = Vec::with_capacity(iterations);
    let mut signal = Vec::new();
    for _ in 0..iterations {
        signal = analyzer.synthesize_padded(&estimate, layout.frames);
        let rebuilt = analyzer.analyze_padded(&signal, layout.frames);
        let mut err = 0.0;
        for (i, (z, &m)) in rebuilt.iter().zip(magnitudes).enumerate() {
            let mag = z.norm();
            err += weights[i % bins] * (mag - m).powi(2);
            estimate[i] = if mag > 0.0 {
                z * (m / mag)
            } else {
                Complex64::new(m, 0.0)
            };
        }
        errors.push(if target_norm > 0.0 {
            err.sqrt() / target_norm
        } else {
            0.0
        });
    }

    Ok(GriffinLimTrace {
        audio: AudioBuffer::new(uncenter(&signal, layout), layout.sample_rate)?,
        errors,
    })
}

/// Multiplicity of each one-sided bin in the two-sided spectrum.
fn bin_weights(bins: usize) -> Vec<f64> {
    (0..bins)
        .map(|k| if k == 0 || k == bins - 1 { 1.0 } else { 2.0 })
        .collect()
}

fn weighted_norm(values: &[f64], weights: &[f64], bins: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| weights[i % bins] * v * v)
        .sum::<f64>()
        .sqrt()
}
