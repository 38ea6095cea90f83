//! Bilinear-transform IIR designs for the three analysis bands.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Band-pass quality factor.
pub const BAND_PASS_Q: f64 = 1.0;

pub const LOW_BAND_HZ: f64 = 90.0;
pub const MID_BAND_HZ: f64 = 280.0;
pub const HIGH_BAND_HZ: f64 = 9000.0;
/// Highest design frequency allowed for the high band, as a fraction of the rate.
pub const HIGH_BAND_CLAMP: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    LowPass1,
    BandPass2,
    HighPass1,
}

/// Normalized transfer function `B(z) / A(z)` with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilterSpec {
    pub kind: FilterKind,
    pub frequency: f64,
    pub sample_rate: u32,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

pub fn design_iir(kind: FilterKind, frequency: f64, sample_rate: u32) -> Result<IirFilterSpec> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(frequency > 0.0 && frequency < nyquist) {
        return Err(Error::invalid(format!(
            "design frequency {frequency} Hz outside (0, {nyquist}) Hz"
        )));
    }
    let fs = sample_rate as f64;
    let (b, a) = match kind {
        FilterKind::LowPass1 => {
            let k = (PI * frequency / fs).tan();
            let norm = 1.0 + k;
            (vec![k / norm, k / norm], vec![1.0, (k - 1.0) / norm])
        }
        FilterKind::HighPass1 => {
            let k = (PI * frequency / fs).tan();
            let norm = 1.0 + k;
            (vec![1.0 / norm, -1.0 / norm], vec![1.0, (k - 1.0) / norm])
        }
        FilterKind::BandPass2 => {
            // Constant 0 dB peak gain band-pass.
            let w0 = 2.0 * PI * frequency / fs;
            let alpha = w0.sin() / (2.0 * BAND_PASS_Q);
            let a0 = 1.0 + alpha;
            (
                vec![alpha / a0, 0.0, -alpha / a0],
                vec![1.0, -2.0 * w0.cos() / a0, (1.0 - alpha) / a0],
            )
        }
    };
    let spec = IirFilterSpec {
        kind,
        frequency,
        sample_rate,
        b,
        a,
    };
    let radius = spec.max_pole_radius();
    assert!(radius < 1.0, "unstable design: pole radius {radius}");
    Ok(spec)
}

impl IirFilterSpec {
    pub fn response(&self, frequency: f64) -> Complex64 {
        let w = 2.0 * PI * frequency / self.sample_rate as f64;
        let z_inv = Complex64::from_polar(1.0, -w);
        let eval = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &x| acc * z_inv + x)
        };
        eval(&self.b) / eval(&self.a)
    }

    pub fn gain_db(&self, frequency: f64) -> f64 {
        20.0 * self.response(frequency).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        match self.a.len() {
            2 => vec![Complex64::new(-self.a[1], 0.0)],
            3 => {
                let (p, q) = (self.a[1], self.a[2]);
                let disc = Complex64::new(p * p - 4.0 * q, 0.0).sqrt();
                vec![(-p + disc) / 2.0, (-p - disc) / 2.0]
            }
            _ => Vec::new(),
        }
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Direct-form II transposed filtering from a zero initial state.
pub fn apply_iir(audio: &AudioBuffer, filter: &IirFilterSpec) -> AudioBuffer {
    let out = filter_samples(audio.samples(), filter);
    AudioBuffer::new(out, audio.sample_rate()).expect("stable filter keeps samples finite")
}

pub fn filter_samples(x: &[f64], filter: &IirFilterSpec) -> Vec<f64> {
    let order = filter.a.len() - 1;
    let mut state = vec![0.0; order];
    x.iter()
        .map(|&input| {
            let y = filter.b[0] * input + state.first().copied().unwrap_or(0.0);
            for i in 0..order {
                let next = state.get(i + 1).copied().unwrap_or(0.0);
                state[i] = filter.b[i + 1] * input - filter.a[i + 1] * y + next;
            }
            y
        })
        .collect()
}

/// The low / mid / high analysis filters for one sample rate.
#[derive(Debug, Clone)]
pub struct BandFilters {
    pub low: IirFilterSpec,
    pub mid: IirFilterSpec,
    pub high: IirFilterSpec,
}

impl BandFilters {
    pub fn for_rate(sample_rate: u32) -> Result<Self> {
        Ok(Self {
            low: design_iir(FilterKind::LowPass1, LOW_BAND_HZ, sample_rate)?,
            mid: design_iir(FilterKind::BandPass2, MID_BAND_HZ, sample_rate)?,
            high: design_iir(
                FilterKind::HighPass1,
                high_band_frequency(sample_rate),
                sample_rate,
            )?,
        })
    }

    pub fn bands(&self) -> [&IirFilterSpec; 3] {
        [&self.low, &self.mid, &self.high]
    }

    pub fn split(&self, samples: &[f64]) -> [Vec<f64>; 3] {
        self.bands().map(|f| filter_samples(samples, f))
    }
}

/// 9 kHz, or `0.45 * sample_rate` when 9 kHz is not representable.
pub fn high_band_frequency(sample_rate: u32) -> f64 {
    HIGH_BAND_HZ.min(HIGH_BAND_CLAMP * sample_rate as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_POWER_DB: f64 = -3.0103;

    #[test]
    fn low_pass_half_power_at_cutoff() {
        let f = design_iir(FilterKind::LowPass1, 90.0, 16000).unwrap();
        assert!((f.gain_db(90.0) - HALF_POWER_DB).abs() < 0.1);
        assert!((f.response(0.0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_pass_is_clamped_at_16k() {
        assert_eq!(high_band_frequency(16000), 7200.0);
        assert_eq!(high_band_frequency(44100), 9000.0);
        assert!(design_iir(FilterKind::HighPass1, 9000.0, 16000).is_err());
        let f = design_iir(FilterKind::HighPass1, 7200.0, 16000).unwrap();
        assert!((f.gain_db(7200.0) - HALF_POWER_DB).abs() < 0.1);
    }

    #[test]
    fn band_pass_peaks_at_center() {
        let f = design_iir(FilterKind::BandPass2, 280.0, 16000).unwrap();
        let peak = (20..=8000)
            .map(|hz| (hz, f.response(hz as f64).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(peak.0, 280);
        assert!((f.response(280.0).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn designs_are_stable() {
        for sr in [16000, 44100, 48000] {
            for f in BandFilters::for_rate(sr).unwrap().bands() {
                assert!(f.max_pole_radius() < 1.0);
            }
        }
    }

    #[test]
    fn low_pass_impulse_response_sums_to_dc_gain() {
        let f = design_iir(FilterKind::LowPass1, 90.0, 16000).unwrap();
        let mut x = vec![0.0; 32000];
        x[0] = 1.0;
        let sum: f64 = filter_samples(&x, &f).iter().sum();
        assert!((sum - 1.0).abs() < 1e-3, "sum {sum}");
    }

    #[test]
    fn high_pass_rejects_50hz() {
        let f = design_iir(FilterKind::HighPass1, 7200.0, 16000).unwrap();
        let x: Vec<f64> = (0..16000)
            .map(|n| (2.0 * PI * 50.0 * n as f64 / 16000.0).sin())
            .collect();
        let audio = AudioBuffer::new(x, 16000).unwrap();
        let y = apply_iir(&audio, &f);
        assert_eq!(y.len(), audio.len());
        assert!(y.rms() < 0.02 * audio.rms());
    }

    #[test]
    fn zero_in_zero_out() {
        let f = design_iir(FilterKind::BandPass2, 280.0, 16000).unwrap();
        assert!(filter_samples(&[0.0; 100], &f).iter().all(|&y| y == 0.0));
    }
}
