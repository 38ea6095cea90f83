//! Mini-batch Adam training with a fixed-order gradient reduction, seeded
//! batch sampling, checkpoints and a comma-separated loss log.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audio::read_wav;
use crate::autodiff::{adam_step, AdamConfig, AdamState, Scalar, Tensor, DEFAULT_LEARNING_RATE};
use crate::dataset::{PreparedManifest, Split};
use crate::error::{Error, Result};
use crate::features::{drop_envelope, read_feature_file};
use crate::losses::{loss_breakdown, LossBreakdown, LossKind};
use crate::model::{Checkpoint, ModelManifest, ModelVariant, OutputDomain, WaveUNet, WaveUNetConfig};

pub const DEFAULT_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    /// Seeds the initial weights and every batch draw.
    pub seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub steps: u64,
    /// Save a checkpoint every this many steps; 0 saves only at the end.
    pub checkpoint_every: u64,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Multi,
            seed: 0,
            lr: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH,
            steps: 1000,
            checkpoint_every: 100,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("clip norm {c} must be positive")));
            }
        }
        Ok(())
    }

    /// FNV-1a over the settings that shape the weights (not `steps`, so a
    /// resumed run keeps its hash).
    pub fn hash(&self) -> String {
        let text = format!(
            "{}|{}|{:e}|{}|{:?}",
            self.variant, self.seed, self.lr, self.batch_size, self.clip_norm
        );
        let h = text
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        format!("{h:016x}")
    }
}

/// One training pair: model-ready conditioning and the target waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub conditioning: Tensor<f32>,
    pub target: Vec<f64>,
}

/// Reads every segment of `split` from a prepared directory, with the
/// envelope channel dropped for models that do not take it.
pub fn load_examples(dir: impl AsRef<Path>, split: Split, variant: ModelVariant) -> Result<Vec<Example>> {
    let dir = dir.as_ref();
    let manifest = PreparedManifest::load(dir)?;
    manifest
        .entries(split)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| {
            let record = read_feature_file(dir.join(&e.features))?;
            let conditioning = if variant.include_envelope() {
                record.conditioning
            } else {
                drop_envelope(&record.conditioning)?
            };
            Ok(Example {
                id: e.id.clone(),
                conditioning,
                target: read_wav(dir.join(&e.audio))?.into_samples(),
            })
        })
        .collect()
}

pub struct Trainer {
    config: TrainConfig,
    model: WaveUNet<f32>,
    adam: AdamState<f32>,
    last_grad_norm: f64,
}

impl Trainer {
    /// A freshly initialised full-size model for `config.variant`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        let model = WaveUNet::build(WaveUNetConfig::for_variant(config.variant), config.seed)?;
        Self::with_model(config, model)
    }

    pub fn with_model(config: TrainConfig, model: WaveUNet<f32>) -> Result<Self> {
        config.validate()?;
        if model.config().variant != config.variant {
            return Err(Error::invalid(format!(
                "model is {} but training asks for {}",
                model.config().variant,
                config.variant
            )));
        }
        let adam = AdamState::new(AdamConfig::with_lr(config.lr), model.params());
        Ok(Self {
            config,
            model,
            adam,
            last_grad_norm: 0.0,
        })
    }

    /// Continues from a checkpoint; its optimizer state, when present,
    /// carries the step count.
    pub fn resume(config: TrainConfig, checkpoint: Checkpoint) -> Result<Self> {
        let optimizer = checkpoint.optimizer.clone();
        let mut trainer = Self::with_model(config, checkpoint.into_model()?)?;
        if let Some(mut state) = optimizer {
            state.config.lr = trainer.config.lr;
            trainer.adam = state;
        }
        Ok(trainer)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &WaveUNet<f32> {
        &self.model
    }

    pub fn step_count(&self) -> u64 {
        self.adam.step
    }

    /// Global gradient norm of the last step, before any clipping.
    pub fn last_grad_norm(&self) -> f64 {
        self.last_grad_norm
    }

    pub fn loss_kind(&self) -> LossKind {
        self.config.variant.loss()
    }

    /// Indices of the batch for the next step, drawn without replacement
    /// from a generator seeded by `(seed, step)`; a dataset no larger than
    /// the batch is used whole.
    pub fn batch_indices(&self, n: usize) -> Vec<usize> {
        if n <= self.config.batch_size {
            return (0..n).collect();
        }
        let mix = self.config.seed ^ self.adam.step.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let mut idx = rand::seq::index::sample(&mut rng, n, self.config.batch_size).into_vec();
        idx.sort_unstable();
        idx
    }

    /// One Adam update on the mean loss of a batch. Items are differentiated
    /// in parallel and their gradients summed in index order.
    pub fn step(&mut self, data: &[Example]) -> Result<LossBreakdown> {
        if data.is_empty() {
            return Err(Error::invalid("no training examples"));
        }
        let batch = self.batch_indices(data.len());
        let kind = self.loss_kind();
        let model = &self.model;
        let results: Vec<Result<(LossBreakdown, Vec<Tensor<f32>>)>> = batch
            .par_iter()
            .map(|&i| model.forward_backward(&data[i].conditioning, &data[i].target, kind))
            .collect();

        let scale = 1.0 / batch.len() as f64;
        let mut grads: Vec<Tensor<f32>> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut losses = Vec::with_capacity(batch.len());
        for r in results {
            let (loss, g) = r?;
            for (acc, gi) in grads.iter_mut().zip(&g) {
                for (a, v) in acc.data_mut().iter_mut().zip(gi.data()) {
                    *a += *v * f32::lit(scale);
                }
            }
            losses.push(loss);
        }
        let mean = mean_breakdown(&losses);
        self.last_grad_norm = clip_global_norm(&mut grads, self.config.clip_norm.unwrap_or(f64::INFINITY));
        adam_step(self.model.params_mut(), &grads, &mut self.adam)?;
        if let Some(i) = self.model.params().iter().position(|p| !p.all_finite()) {
            return Err(Error::NonFinite {
                op: format!("Adam update of parameter {i}"),
            });
        }
        Ok(mean)
    }

    /// Mean loss of `kind` over `data` without updating the model.
    pub fn evaluate(&self, data: &[Example], kind: LossKind) -> Result<LossBreakdown> {
        evaluate_model(&self.model, data, kind)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.model.config().clone(),
            seed: self.config.seed,
            params: self.model.params().to_vec(),
            optimizer: Some(self.adam.clone()),
        }
    }

    pub fn manifest(&self) -> ModelManifest {
        ModelManifest {
            variant: self.config.variant,
            seed: self.config.seed,
            conditioning_channels: self.model.config().conditioning_channels,
            parameter_count: self.model.config().parameter_count(),
            step: self.step_count(),
            config_hash: self.config.hash(),
        }
    }
}

/// Mean loss of `kind` between a waveform model's outputs and the targets.
/// Magnitude models are scored on their training objective.
pub fn evaluate_model(model: &WaveUNet<f32>, data: &[Example], kind: LossKind) -> Result<LossBreakdown> {
    if data.is_empty() {
        return Err(Error::invalid("no evaluation examples"));
    }
    let losses = data
        .par_iter()
        .map(|e| match model.config().output_domain() {
            OutputDomain::Waveform => {
                let out = model.predict(&e.conditioning)?.to_f64_vec();
                loss_breakdown(&out, &e.target, kind)
            }
            OutputDomain::Magnitude => model
                .forward_backward(&e.conditioning, &e.target, LossKind::Recon)
                .map(|(l, _)| l),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_breakdown(&losses))
}

/// Scales every gradient by `limit / norm` when the global L2 norm exceeds
/// `limit`. Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], limit: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > limit {
        let k = T::lit(limit / norm);
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v = *v * k);
        }
    }
    norm
}

fn mean_breakdown(losses: &[LossBreakdown]) -> LossBreakdown {
    let n = losses.len() as f64;
    let mut mean = LossBreakdown {
        total: 0.0,
        terms: losses[0].terms.iter().map(|(name, _)| (name.clone(), 0.0)).collect(),
    };
    for l in losses {
        mean.total += l.total / n;
        for (acc, (_, v)) in mean.terms.iter_mut().zip(&l.terms) {
            acc.1 += v / n;
        }
    }
    mean
}

/// `step,loss,<term>...`
pub fn log_header(loss: &LossBreakdown) -> String {
    let mut s = String::from("step,loss");
    for (name, _) in &loss.terms {
        s.push(',');
        s.push_str(name);
    }
    s
}

pub fn log_line(step: u64, loss: &LossBreakdown) -> String {
    let mut s = format!("{step},{:.8e}", loss.total);
    for (_, v) in &loss.terms {
        s.push_str(&format!(",{v:.8e}"));
    }
    s
}

/// Appends one loss line to `path`, writing the header first when the file
/// is new or empty.
pub fn append_log(path: impl AsRef<Path>, step: u64, loss: &LossBreakdown) -> Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(&log_header(loss));
        text.push('\n');
    }
    text.push_str(&log_line(step, loss));
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parses a loss log back into `(step, total)` pairs.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<(u64, f64)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split(',');
            let bad = || Error::format("loss log", format!("line `{l}`"));
            let step = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let loss = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            Ok((step, loss))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro(variant: ModelVariant) -> WaveUNetConfig {
        WaveUNetConfig {
            variant,
            channels: vec![4, 6],
            kernel: 5,
            conditioning_channels: 3,
            padded_len: 64,
            nominal_len: 64,
            output_channels: 1,
        }
    }

    fn toy_data(n: usize) -> Vec<Example> {
        (0..n)
            .map(|k| {
                let cond: Vec<f64> = (0..192).map(|i| ((i * (k + 1)) as f64 * 0.05).sin()).collect();
                let target = (0..64).map(|i| 0.5 * ((i + k) as f64 * 0.3).sin()).collect();
                Example {
                    id: format!("toy{k}"),
                    conditioning: Tensor::from_f64(&[3, 64], &cond).unwrap(),
                    target,
                }
            })
            .collect()
    }

    fn trainer(seed: u64, batch: usize) -> Trainer {
        let config = TrainConfig {
            variant: ModelVariant::Wav,
            seed,
            lr: 1e-2,
            batch_size: batch,
            steps: 0,
            checkpoint_every: 0,
            clip_norm: None,
        };
        Trainer::with_model(config, WaveUNet::build(micro(ModelVariant::Wav), seed).unwrap()).unwrap()
    }

    #[test]
    fn loss_drops_on_a_toy_problem() {
        let data = toy_data(3);
        let mut t = trainer(1, 16);
        let first = t.step(&data).unwrap().total;
        let mut last = first;
        for _ in 0..60 {
            last = t.step(&data).unwrap().total;
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
        assert_eq!(t.step_count(), 61);
    }

    #[test]
    fn batches_depend_only_on_seed_and_step() {
        let a = trainer(7, 4);
        let b = trainer(7, 4);
        assert_eq!(a.batch_indices(40), b.batch_indices(40));
        let idx = a.batch_indices(40);
        assert_eq!(idx.len(), 4);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(trainer(8, 4).batch_indices(40), idx);
        assert_eq!(a.batch_indices(3), vec![0, 1, 2]);
    }

    #[test]
    fn resume_matches_an_uninterrupted_run() {
        let data = toy_data(5);
        let mut straight = trainer(3, 2);
        for _ in 0..6 {
            straight.step(&data).unwrap();
        }
        let mut first = trainer(3, 2);
        for _ in 0..3 {
            first.step(&data).unwrap();
        }
        let mut buf = Vec::new();
        first.checkpoint().write_to(&mut buf).unwrap();
        let ck = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        let mut resumed = Trainer::resume(first.config().clone(), ck).unwrap();
        assert_eq!(resumed.step_count(), 3);
        for _ in 0..3 {
            resumed.step(&data).unwrap();
        }
        assert_eq!(resumed.model(), straight.model());
    }

    #[test]
    fn non_finite_targets_abort() {
        let mut data = toy_data(1);
        data[0].target[5] = f64::NAN;
        let err = trainer(0, 1).step(&data).unwrap_err();
        assert!(err.is_numeric(), "{err}");
    }

    #[test]
    fn log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        let l = LossBreakdown {
            total: 1.5,
            terms: vec![("wave".into(), 0.5), ("stft64".into(), 1.0)],
        };
        append_log(&p, 1, &l).unwrap();
        append_log(&p, 2, &l).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("step,loss,wave,stft64\n"));
        assert_eq!(read_log(&p).unwrap(), vec![(1, 1.5), (2, 1.5)]);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let mut g = vec![
            Tensor::<f64>::from_f64(&[2], &[3.0, 0.0]).unwrap(),
            Tensor::from_f64(&[1], &[4.0]).unwrap(),
        ];
        assert_eq!(clip_global_norm(&mut g, 10.0), 5.0);
        assert_eq!(g[0].data(), &[3.0, 0.0]);
        clip_global_norm(&mut g, 1.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-12 && (g[1].data()[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn hash_ignores_step_budget() {
        let a = TrainConfig::default();
        let b = TrainConfig { steps: 5, ..a.clone() };
        let c = TrainConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
