use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{stft_config, OutputDomain, WaveUNetConfig, LEAKY_SLOPE};
use crate::audio::{AudioBuffer, CANONICAL_RATE};
use crate::autodiff::{glorot_uniform, Scalar, Tape, Tensor, Var};
use crate::dsp::stft::stft_magnitudes;
use crate::dsp::{griffin_lim, SpectrogramLayout};
use crate::error::{Error, Result};
use crate::losses::{build_loss, LossBreakdown, LossKind};

/// Generator output before any phase reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Waveform(AudioBuffer),
    /// Frames × bins magnitudes on the STFT-variant grid.
    Magnitudes {
        magnitudes: Vec<f64>,
        layout: SpectrogramLayout,
    },
}

/// Graph handles of one recorded forward pass.
pub struct Prediction {
    pub params: Vec<Var>,
    /// `output_channels × nominal_len`.
    pub output: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveUNet<T> {
    config: WaveUNetConfig,
    params: Vec<Tensor<T>>,
}

impl<T: Scalar> WaveUNet<T> {
    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn build(config: WaveUNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .parameter_shapes()
            .into_iter()
            .map(|shape| match shape.as_slice() {
                &[c_out, c_in, k] => glorot_uniform(&shape, c_in * k, c_out * k, &mut rng),
                _ => Tensor::zeros(&shape),
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn from_params(config: WaveUNetConfig, params: Vec<Tensor<T>>) -> Result<Self> {
        config.validate()?;
        let shapes = config.parameter_shapes();
        if shapes.len() != params.len() {
            return Err(Error::shape(
                "WaveUNet",
                format!("expected {} parameter arrays, got {}", shapes.len(), params.len()),
            ));
        }
        for (i, (s, p)) in shapes.iter().zip(&params).enumerate() {
            if s.as_slice() != p.shape() {
                return Err(Error::shape(
                    "WaveUNet",
                    format!("parameter {i}: expected {s:?}, got {:?}", p.shape()),
                ));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &WaveUNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<Tensor<T>> {
        self.params
    }

    pub fn cast<U: Scalar>(&self) -> WaveUNet<U> {
        WaveUNet {
            config: self.config.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Checks the conditioning shape, moves it to the network's time grid
    /// and zero-pads it to `padded_len`.
    pub fn prepare_input(&self, conditioning: &Tensor<T>) -> Result<Tensor<T>> {
        let c = &self.config;
        let (channels, len) = match conditioning.shape() {
            [ch, l] => (*ch, *l),
            s => return Err(Error::shape("conditioning", format!("expected 2-D, got {s:?}"))),
        };
        if channels != c.conditioning_channels {
            return Err(Error::shape(
                "conditioning",
                format!(
                    "{} model expects {} channels, got {channels}",
                    c.variant, c.conditioning_channels
                ),
            ));
        }
        let (steps, stride) = match c.output_domain() {
            OutputDomain::Waveform => (len, 1),
            OutputDomain::Magnitude => (stft_config().frame_count(len), stft_config().hop_size),
        };
        if steps != c.nominal_len {
            return Err(Error::shape(
                "conditioning",
                format!("length {len} does not map onto {} steps", c.nominal_len),
            ));
        }
        let left = c.pad_left();
        let mut data = vec![T::zero(); channels * c.padded_len];
        for ch in 0..channels {
            let src = conditioning.row(ch);
            let dst = &mut data[ch * c.padded_len + left..][..steps];
            for (t, d) in dst.iter_mut().enumerate() {
                // Frame t of a centered STFT is centered on sample t · hop.
                *d = src[(t * stride).min(len - 1)];
            }
        }
        Tensor::new(vec![channels, c.padded_len], data)
    }

    /// Records the network on `tape` for an input from [`prepare_input`].
    ///
    /// [`prepare_input`]: WaveUNet::prepare_input
    pub fn record(&self, tape: &mut Tape<T>, input: Var, trainable: bool) -> Result<Prediction> {
        let c = &self.config;
        let levels = c.levels();
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();

        let mut skips = Vec::with_capacity(levels + 1);
        skips.push(input);
        let mut h = input;
        for level in 0..levels {
            let y = tape.conv1d(h, params[2 * level], params[2 * level + 1], 2)?;
            h = tape.leaky_relu(y, LEAKY_SLOPE)?;
            skips.push(h);
        }
        for (i, level) in (1..=levels).rev().enumerate() {
            let up = tape.upsample_linear(h)?;
            let merged = tape.concat_channels(up, skips[level - 1])?;
            let base = 2 * levels + 2 * i;
            let y = tape.conv1d(merged, params[base], params[base + 1], 1)?;
            h = tape.leaky_relu(y, LEAKY_SLOPE)?;
        }
        let head = 4 * levels;
        let y = tape.conv1d(h, params[head], params[head + 1], 1)?;
        let y = tape.crop_time(y, c.pad_left(), c.nominal_len)?;
        let output = match c.output_domain() {
            OutputDomain::Waveform => tape.tanh(y)?,
            OutputDomain::Magnitude => tape.softplus(y)?,
        };
        Ok(Prediction { params, output })
    }

    /// Raw network output, `output_channels × nominal_len`.
    pub fn predict(&self, conditioning: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.prepare_input(conditioning)?;
        let mut tape = Tape::new().with_finite_checks(true);
        let x = tape.constant(input);
        let pred = self.record(&mut tape, x, false)?;
        Ok(tape.value(pred.output).clone())
    }

    pub fn forward(&self, conditioning: &Tensor<T>) -> Result<ModelOutput> {
        let out = self.predict(conditioning)?;
        match self.config.output_domain() {
            OutputDomain::Waveform => Ok(ModelOutput::Waveform(AudioBuffer::new(
                out.to_f64_vec(),
                CANONICAL_RATE,
            )?)),
            OutputDomain::Magnitude => {
                let len = conditioning.width();
                let layout = SpectrogramLayout::for_signal(stft_config(), len, CANONICAL_RATE);
                Ok(ModelOutput::Magnitudes {
                    magnitudes: transpose(&out.to_f64_vec(), out.rows(), out.width()),
                    layout,
                })
            }
        }
    }

    /// Audio for `conditioning`; magnitude outputs go through Griffin-Lim.
    pub fn synthesize(&self, conditioning: &Tensor<T>, iterations: usize, seed: u64) -> Result<AudioBuffer> {
        match self.forward(conditioning)? {
            ModelOutput::Waveform(audio) => Ok(audio),
            ModelOutput::Magnitudes { magnitudes, layout } => {
                griffin_lim(&magnitudes, layout, iterations, seed)
            }
        }
    }

    /// Loss against `target` audio and its gradient for every parameter.
    ///
    /// Magnitude-domain models compare against the target's STFT
    /// magnitudes and accept only [`LossKind::Recon`].
    pub fn forward_backward(
        &self,
        conditioning: &Tensor<T>,
        target: &[f64],
        loss: LossKind,
    ) -> Result<(LossBreakdown, Vec<Tensor<T>>)> {
        let input = self.prepare_input(conditioning)?;
        let mut tape = Tape::new().with_finite_checks(true);
        let x = tape.constant(input);
        let pred = self.record(&mut tape, x, true)?;

        let c = &self.config;
        let target = match c.output_domain() {
            OutputDomain::Waveform => {
                if target.len() != c.nominal_len {
                    return Err(Error::shape(
                        "target",
                        format!("expected {} samples, got {}", c.nominal_len, target.len()),
                    ));
                }
                Tensor::from_f64(&[1, target.len()], target)?
            }
            OutputDomain::Magnitude => {
                if loss != LossKind::Recon {
                    return Err(Error::invalid(format!(
                        "magnitude-domain models train with L1 on magnitudes, not {loss}"
                    )));
                }
                let mags = stft_magnitudes(target, stft_config())?;
                let frames = mags.len() / c.output_channels;
                if frames != c.nominal_len {
                    return Err(Error::shape(
                        "target",
                        format!("{frames} frames, expected {}", c.nominal_len),
                    ));
                }
                let bins_by_frames = transpose(&mags, frames, c.output_channels);
                Tensor::from_f64(&[c.output_channels, frames], &bins_by_frames)?
            }
        };
        let target = tape.constant(target);
        let graph = match c.output_domain() {
            OutputDomain::Waveform => build_loss(&mut tape, pred.output, target, loss)?,
            OutputDomain::Magnitude => build_loss(&mut tape, pred.output, target, LossKind::Recon)?,
        };
        let breakdown = graph.breakdown(&tape);
        if !breakdown.total.is_finite() {
            return Err(Error::NonFinite {
                op: tape.first_non_finite().unwrap_or("loss").to_string(),
            });
        }
        let mut grads = tape.backward(graph.total)?;
        let out = pred
            .params
            .iter()
            .zip(&self.params)
            .map(|(v, p)| grads.take(*v).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect::<Vec<_>>();
        if let Some(i) = out.iter().position(|g| !g.all_finite()) {
            return Err(Error::NonFinite {
                op: format!("gradient of parameter {i}"),
            });
        }
        Ok((breakdown, out))
    }
}

fn transpose(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelVariant, SEGMENT_LEN};

    fn micro() -> WaveUNetConfig {
        WaveUNetConfig {
            variant: ModelVariant::Wav,
            channels: vec![4, 6],
            kernel: 5,
            conditioning_channels: 3,
            padded_len: 64,
            nominal_len: 60,
            output_channels: 1,
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = WaveUNet::<f32>::build(micro(), 9).unwrap();
        let b = WaveUNet::<f32>::build(micro(), 9).unwrap();
        let c = WaveUNet::<f32>::build(micro(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.params()[1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn micro_output_is_bounded_and_cropped() {
        let net = WaveUNet::<f64>::build(micro(), 1).unwrap();
        let cond = Tensor::zeros(&[3, 60]);
        let out = net.predict(&cond).unwrap();
        assert_eq!(out.shape(), &[1, 60]);
        assert!(out.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let cfg = WaveUNetConfig::for_variant(ModelVariant::MultiNoEnv);
        let net = WaveUNet::<f32>::build(cfg, 0).unwrap();
        let cond = Tensor::zeros(&[37, SEGMENT_LEN]);
        assert!(matches!(
            net.prepare_input(&cond),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn padding_then_cropping_is_identity() {
        let net = WaveUNet::<f64>::build(micro(), 0).unwrap();
        let values: Vec<f64> = (0..180).map(|i| i as f64).collect();
        let cond = Tensor::from_f64(&[3, 60], &values).unwrap();
        let padded = net.prepare_input(&cond).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(padded);
        let back = tape.crop_time(x, net.config().pad_left(), 60).unwrap();
        assert_eq!(tape.value(back), &cond);
    }

    #[test]
    fn matching_target_leaves_only_tie_gradients() {
        let net = WaveUNet::<f64>::build(micro(), 3).unwrap();
        let cond = Tensor::from_f64(&[3, 60], &[0.3; 180]).unwrap();
        let out = net.predict(&cond).unwrap().to_f64_vec();
        let (loss, grads) = net.forward_backward(&cond, &out, LossKind::Recon).unwrap();
        assert_eq!(loss.total, 0.0);
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
    }
}
