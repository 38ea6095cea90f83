//! Rational-ratio windowed-sinc resampling.

use num_integer::Integer;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const TAPS_PER_SIDE: f64 = 32.0;
const KAISER_BETA: f64 = 8.0;
/// Above this many phases kernels are built per output sample instead of tabled.
const MAX_TABLED_PHASES: usize = 2048;

pub fn resample(audio: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    let source_rate = audio.sample_rate();
    if source_rate == target_rate {
        return Ok(audio.clone());
    }
    let out = resample_samples(audio.samples(), source_rate, target_rate);
    AudioBuffer::new(out, target_rate)
}

pub fn output_len(len: usize, source_rate: u32, target_rate: u32) -> usize {
    (len as f64 * target_rate as f64 / source_rate as f64).round() as usize
}

pub fn resample_samples(x: &[f64], source_rate: u32, target_rate: u32) -> Vec<f64> {
    let g = source_rate.gcd(&target_rate) as usize;
    let up = target_rate as usize / g;
    let down = source_rate as usize / g;
    let cutoff = (target_rate as f64 / source_rate as f64).min(1.0);
    let half_width = TAPS_PER_SIDE / cutoff;
    let reach = half_width.ceil() as i64;

    let kernel = |phase: usize| -> Vec<f64> {
        let offset = phase as f64 / up as f64;
        (-reach..=reach)
            .map(|k| {
                let d = k as f64 - offset;
                if d.abs() >= half_width {
                    0.0
                } else {
                    cutoff * sinc(cutoff * d) * kaiser(d / half_width, KAISER_BETA)
                }
            })
            .collect()
    };
    let table: Option<Vec<Vec<f64>>> =
        (up <= MAX_TABLED_PHASES).then(|| (0..up).map(kernel).collect());

    let n_out = output_len(x.len(), source_rate, target_rate);
    (0..n_out)
        .map(|m| {
            let pos = m * down;
            let center = (pos / up) as i64;
            let phase = pos % up;
            let owned;
            let taps: &[f64] = match &table {
                Some(t) => &t[phase],
                None => {
                    owned = kernel(phase);
                    &owned
                }
            };
            let (mut acc, mut weight) = (0.0, 0.0);
            for (j, &h) in taps.iter().enumerate() {
                let i = center + j as i64 - reach;
                if i >= 0 && (i as usize) < x.len() {
                    acc += h * x[i as usize];
                    weight += h;
                }
            }
            if weight.abs() > 1e-12 {
                acc / weight
            } else {
                0.0
            }
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Kaiser window at normalized position `t` in [-1, 1].
fn kaiser(t: f64, beta: f64) -> f64 {
    bessel_i0(beta * (1.0 - t * t).max(0.0).sqrt()) / bessel_i0(beta)
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
