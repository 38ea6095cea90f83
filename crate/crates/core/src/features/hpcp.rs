//! Harmonic pitch class profile.

use crate::audio::AudioBuffer;
use crate::dsp::stft::stft_magnitudes;
use crate::dsp::SpectrogramConfig;

use super::SILENCE_FLOOR;

pub const HPCP_FFT: usize = 4096;
pub const HPCP_HOP: usize = 512;
pub const HPCP_MIN_HZ: f64 = 20.0;
pub const HPCP_MAX_HZ: f64 = 5000.0;
/// Peaks more than 60 dB below the frame maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 1e-3;
pub const PITCH_CLASS_NAMES: [&str; 12] =
    ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
/// Index of A in [`PITCH_CLASS_NAMES`].
const A_CLASS: i64 = 9;

/// Twelve values, C first; the largest is 1 unless no peak was found.
pub fn extract_hpcp(audio: &AudioBuffer) -> [f64; 12] {
    hpcp_of(audio.samples(), audio.sample_rate())
}

pub(crate) fn hpcp_of(samples: &[f64], sample_rate: u32) -> [f64; 12] {
    let cfg = SpectrogramConfig::new(HPCP_FFT, HPCP_HOP).expect("valid HPCP resolution");
    let bins = cfg.bins();
    let bin_hz = cfg.bin_hz(sample_rate);
    let mags = stft_magnitudes(samples, cfg).expect("non-empty signal");
    let mut total = [0.0; 12];
    for frame in mags.chunks_exact(bins) {
        add_frame_profile(frame, bin_hz, &mut total);
    }
    let peak = total.iter().fold(0.0f64, |m, v| m.max(*v));
    if peak <= 0.0 {
        return [0.0; 12];
    }
    total.map(|v| v / peak)
}

fn add_frame_profile(frame: &[f64], bin_hz: f64, profile: &mut [f64; 12]) {
    let max = frame.iter().fold(0.0f64, |m, v| m.max(*v));
    if max <= SILENCE_FLOOR {
        return;
    }
    let lo = ((HPCP_MIN_HZ / bin_hz).floor() as usize).max(1);
    let hi = ((HPCP_MAX_HZ / bin_hz).ceil() as usize).min(frame.len() - 2);
    for k in lo..=hi {
        let m = frame[k];
        if m < PEAK_THRESHOLD * max || m <= frame[k - 1] || m < frame[k + 1] {
            continue;
        }
        let (offset, amp) = parabolic_peak(frame[k - 1], m, frame[k + 1]);
        let f = (k as f64 + offset) * bin_hz;
        if !(HPCP_MIN_HZ..=HPCP_MAX_HZ).contains(&f) {
            continue;
        }
        let semitones = 12.0 * (f / 440.0).log2();
        let nearest = semitones.round() as i64;
        for n in nearest - 1..=nearest + 1 {
            let d = semitones - n as f64;
            if d.abs() >= 1.0 {
                continue;
            }
            let w = (std::f64::consts::FRAC_PI_2 * d).cos().powi(2);
            profile[(n + A_CLASS).rem_euclid(12) as usize] += w * amp * amp;
        }
    }
}

/// Vertex of the parabola through three log-magnitudes: (bin offset in
/// `[-0.5, 0.5]`, interpolated linear magnitude).
fn parabolic_peak(left: f64, centre: f64, right: f64) -> (f64, f64) {
    let floor = 1e-300;
    let (a, b, c) = (left.max(floor).ln(), centre.max(floor).ln(), right.max(floor).ln());
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-12 {
        return (0.0, centre);
    }
    let p = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    (p, (b - 0.25 * (a - c) * p).exp())
}
