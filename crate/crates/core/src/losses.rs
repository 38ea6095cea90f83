//! Training objectives: waveform L1, plus magnitude-spectrogram L1 terms at
//! one (WAVSPEC) or six (MULTI) resolutions.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Scalar, Tape, Tensor, Var};
use crate::dsp::SpectrogramConfig;
use crate::error::{Error, Result};

/// FFT sizes of the multi-resolution loss, largest first.
pub const MULTI_FFT_SIZES: [usize; 6] = [2048, 1024, 512, 256, 128, 64];
pub const WAVSPEC_FFT: usize = 1024;
pub const WAVSPEC_HOP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Recon,
    WavSpec,
    Multi,
}

impl LossKind {
    /// Spectrogram resolutions of the magnitude terms, in summation order.
    pub fn resolutions(self) -> Vec<SpectrogramConfig> {
        match self {
            LossKind::Recon => Vec::new(),
            LossKind::WavSpec => vec![SpectrogramConfig::new(WAVSPEC_FFT, WAVSPEC_HOP)
                .expect("valid wavspec resolution")],
            LossKind::Multi => MULTI_FFT_SIZES
                .iter()
                .map(|&n| SpectrogramConfig::new(n, n / 4).expect("valid multi resolution"))
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Recon => "recon",
            LossKind::WavSpec => "wavspec",
            LossKind::Multi => "multi",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "recon" => Ok(LossKind::Recon),
            "wavspec" => Ok(LossKind::WavSpec),
            "multi" => Ok(LossKind::Multi),
            other => Err(Error::invalid(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// A loss recorded on a tape: the total and its named terms.
#[derive(Debug, Clone)]
pub struct LossGraph {
    pub total: Var,
    pub terms: Vec<(String, Var)>,
}

/// Per-term values of an evaluated loss, in build order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub terms: Vec<(String, f64)>,
}

impl LossGraph {
    pub fn breakdown<T: Scalar>(&self, tape: &Tape<T>) -> LossBreakdown {
        LossBreakdown {
            total: tape.scalar_value(self.total),
            terms: self
                .terms
                .iter()
                .map(|(n, v)| (n.clone(), tape.scalar_value(*v)))
                .collect(),
        }
    }
}

/// Records `kind` between a `1 × L` (or `L`) output and target.
pub fn build_loss<T: Scalar>(
    tape: &mut Tape<T>,
    output: Var,
    target: Var,
    kind: LossKind,
) -> Result<LossGraph> {
    build_loss_with(tape, output, target, &kind.resolutions())
}

/// Waveform L1 plus one mean-reduced magnitude L1 per resolution.
pub fn build_loss_with<T: Scalar>(
    tape: &mut Tape<T>,
    output: Var,
    target: Var,
    resolutions: &[SpectrogramConfig],
) -> Result<LossGraph> {
    let wave = tape.l1(output, target)?;
    let mut terms = vec![("wave".to_string(), wave)];
    let mut total = wave;
    for &cfg in resolutions {
        let a = tape.stft_magnitude(output, cfg)?;
        let b = tape.stft_magnitude(target, cfg)?;
        let term = tape.l1(a, b)?;
        terms.push((format!("stft{}", cfg.fft_size), term));
        total = tape.add(total, term)?;
    }
    Ok(LossGraph { total, terms })
}

fn evaluate(estimate: &[f64], target: &[f64], kind: LossKind) -> Result<LossBreakdown> {
    if estimate.len() != target.len() {
        return Err(Error::shape(
            "loss",
            format!("lengths {} and {}", estimate.len(), target.len()),
        ));
    }
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(Tensor::from_f64(&[1, estimate.len()], estimate)?);
    let b = tape.constant(Tensor::from_f64(&[1, target.len()], target)?);
    let graph = build_loss(&mut tape, a, b, kind)?;
    Ok(graph.breakdown(&tape))
}

/// Mean absolute error.
pub fn loss_recon(estimate: &[f64], target: &[f64]) -> Result<f64> {
    evaluate(estimate, target, LossKind::Recon).map(|b| b.total)
}

/// Mean absolute error plus single-resolution magnitude L1.
pub fn loss_wavspec(estimate: &[f64], target: &[f64]) -> Result<f64> {
    evaluate(estimate, target, LossKind::WavSpec).map(|b| b.total)
}

/// Mean absolute error plus six-resolution magnitude L1.
pub fn loss_multi(estimate: &[f64], target: &[f64]) -> Result<f64> {
    evaluate(estimate, target, LossKind::Multi).map(|b| b.total)
}

/// All terms of `kind` evaluated at float64.
pub fn loss_breakdown(estimate: &[f64], target: &[f64], kind: LossKind) -> Result<LossBreakdown> {
    evaluate(estimate, target, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    fn tone(n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 * (2.0 * PI * 500.0 * i as f64 / 16000.0 + phase).sin())
            .collect()
    }

    #[test]
    fn resolutions_match_the_definition() {
        let multi = LossKind::Multi.resolutions();
        let ffts: Vec<usize> = multi.iter().map(|c| c.fft_size).collect();
        assert_eq!(ffts, MULTI_FFT_SIZES);
        assert!(multi.iter().all(|c| c.hop_size * 4 == c.fft_size));
        let ws = LossKind::WavSpec.resolutions();
        assert_eq!((ws[0].fft_size, ws[0].hop_size), (1024, 512));
        assert!(LossKind::Recon.resolutions().is_empty());
    }

    #[test]
    fn zero_at_equality() {
        let x = noise(4096, 1);
        for kind in [LossKind::Recon, LossKind::WavSpec, LossKind::Multi] {
            assert_eq!(evaluate(&x, &x, kind).unwrap().total, 0.0, "{kind}");
        }
    }

    #[test]
    fn recon_of_zero_against_ones_is_one() {
        assert_eq!(loss_recon(&[0.0; 10], &[1.0; 10]).unwrap(), 1.0);
    }

    #[test]
    fn recon_matches_direct_mean() {
        let (a, b) = (noise(777, 2), noise(777, 3));
        let direct = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 777.0;
        assert!((loss_recon(&a, &b).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn wavspec_dominates_recon() {
        for seed in 0..5 {
            let (a, b) = (noise(2048, seed), noise(2048, seed + 100));
            assert!(loss_wavspec(&a, &b).unwrap() >= loss_recon(&a, &b).unwrap());
        }
    }

    #[test]
    fn phase_shift_is_nearly_invisible_to_the_spectral_terms() {
        let n = 29538;
        let x = tone(n, 0.0);
        let ratio = |estimate: &[f64]| {
            let b = loss_breakdown(estimate, &x, LossKind::Multi).unwrap();
            let spectral: f64 = b.terms[1..].iter().map(|t| t.1).sum();
            (b.terms[0].1, spectral / b.terms[0].1)
        };
        let (wave, shifted) = ratio(&tone(n, PI / 2.0));
        let (_, silent) = ratio(&vec![0.0; n]);
        assert!(wave > 0.4, "wave term {wave}");
        // Only the reflect-padded edge frames see the shift.
        assert!(shifted < 0.05 * silent, "{shifted} vs {silent}");
    }

    #[test]
    fn monotone_in_amplitude_error() {
        let x = tone(8192, 0.0);
        for kind in [LossKind::Recon, LossKind::WavSpec, LossKind::Multi] {
            let at = |alpha: f64| {
                let est: Vec<f64> = x.iter().map(|v| alpha * v).collect();
                evaluate(&est, &x, kind).unwrap().total
            };
            let mut prev = 0.0;
            for d in [0.1, 0.2, 0.3, 0.4, 0.5] {
                let (lo, hi) = (at(1.0 - d), at(1.0 + d));
                assert!(lo > prev && hi > prev, "{kind} at ±{d}");
                prev = lo.min(hi);
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(loss_multi(&[0.0; 100], &[0.0; 99]).is_err());
    }

    #[test]
    fn kind_parses_case_insensitively() {
        assert_eq!("MULTI".parse::<LossKind>().unwrap(), LossKind::Multi);
        assert!("l2".parse::<LossKind>().is_err());
    }
}
