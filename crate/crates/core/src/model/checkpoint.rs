//! `LFW1` parameter files and the plain-text model manifest.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "LFW1" u32 version
//! u32 variant  u32 levels  levels × u32 channels  u32 kernel
//! u32 conditioning_channels  u32 padded_len  u32 nominal_len  u32 output_channels
//! u64 seed
//! tensor list (parameters in graph order)
//! u8 has_optimizer
//!   [f64 lr  f64 beta1  f64 beta2  f64 eps  u64 step  tensor list m  tensor list v]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ModelVariant, WaveUNet, WaveUNetConfig};
use crate::autodiff::io::{read_tensors, read_u32, read_u64, write_tensors, write_u32, write_u64};
use crate::autodiff::{AdamConfig, AdamState, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LFW1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: WaveUNetConfig,
    pub seed: u64,
    pub params: Vec<Tensor<f32>>,
    pub optimizer: Option<AdamState<f32>>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<WaveUNet<f32>> {
        WaveUNet::from_params(self.config.clone(), self.params.clone())
    }

    pub fn into_model(self) -> Result<WaveUNet<f32>> {
        WaveUNet::from_params(self.config, self.params)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let c = &self.config;
        w.write_all(CHECKPOINT_MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, c.variant.code())?;
        write_u32(w, c.levels() as u32)?;
        for &ch in &c.channels {
            write_u32(w, ch as u32)?;
        }
        for v in [
            c.kernel,
            c.conditioning_channels,
            c.padded_len,
            c.nominal_len,
            c.output_channels,
        ] {
            write_u32(w, v as u32)?;
        }
        write_u64(w, self.seed)?;
        write_tensors(w, &self.params)?;
        match &self.optimizer {
            None => w.write_all(&[0]),
            Some(state) => {
                w.write_all(&[1])?;
                let a = state.config;
                for v in [a.lr, a.beta1, a.beta2, a.eps] {
                    write_u64(w, v.to_bits())?;
                }
                write_u64(w, state.step)?;
                write_tensors(w, &state.m)?;
                write_tensors(w, &state.v)
            }
        }
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format("checkpoint", "missing magic"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let variant = ModelVariant::from_code(read_u32(r)?)?;
        let levels = read_u32(r)? as usize;
        if levels > 32 {
            return Err(Error::format("checkpoint", format!("{levels} levels")));
        }
        let channels = (0..levels)
            .map(|_| read_u32(r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut next = || read_u32(r).map(|v| v as usize);
        let config = WaveUNetConfig {
            variant,
            channels,
            kernel: next()?,
            conditioning_channels: next()?,
            padded_len: next()?,
            nominal_len: next()?,
            output_channels: next()?,
        };
        config
            .validate()
            .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let seed = read_u64(r)?;
        let params = read_tensors(r)?;
        let model = WaveUNet::from_params(config.clone(), params)
            .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let params = model.into_params();

        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)
            .map_err(|_| Error::format("checkpoint", "missing optimizer flag"))?;
        let optimizer = match flag[0] {
            0 => None,
            1 => {
                let mut f = || read_u64(r).map(f64::from_bits);
                let adam = AdamConfig {
                    lr: f()?,
                    beta1: f()?,
                    beta2: f()?,
                    eps: f()?,
                };
                let step = read_u64(r)?;
                let m = read_tensors(r)?;
                let v = read_tensors(r)?;
                let shapes_match = |ts: &[Tensor<f32>]| {
                    ts.len() == params.len()
                        && ts.iter().zip(&params).all(|(a, b)| a.shape() == b.shape())
                };
                if !shapes_match(&m) || !shapes_match(&v) {
                    return Err(Error::format("checkpoint", "optimizer moments do not match parameters"));
                }
                Some(AdamState {
                    config: adam,
                    step,
                    m,
                    v,
                })
            }
            other => {
                return Err(Error::format("checkpoint", format!("optimizer flag {other}")));
            }
        };
        Ok(Self {
            config,
            seed,
            params,
            optimizer,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    checkpoint
        .write_to(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::read_from(&mut BufReader::new(file))
}

/// Human-readable summary stored next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelManifest {
    pub variant: ModelVariant,
    pub seed: u64,
    pub conditioning_channels: usize,
    pub parameter_count: usize,
    pub step: u64,
    pub config_hash: String,
}

impl ModelManifest {
    pub fn to_text(&self) -> String {
        format!(
            "variant={}\nseed={}\nconditioning_channels={}\nparameter_count={}\nstep={}\nconfig_hash={}\n",
            self.variant,
            self.seed,
            self.conditioning_channels,
            self.parameter_count,
            self.step,
            self.config_hash
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("model manifest", format!("line `{line}`")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::format("model manifest", format!("missing `{k}`")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format("model manifest", format!("`{k}` is not a number")))
        };
        Ok(Self {
            variant: get("variant")?.parse()?,
            seed: num("seed")?,
            conditioning_channels: num("conditioning_channels")? as usize,
            parameter_count: num("parameter_count")? as usize,
            step: num("step")?,
            config_hash: get("config_hash")?.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WaveUNetConfig {
        WaveUNetConfig {
            variant: ModelVariant::Multi,
            channels: vec![2, 3],
            kernel: 5,
            conditioning_channels: 4,
            padded_len: 16,
            nominal_len: 13,
            output_channels: 1,
        }
    }

    #[test]
    fn round_trip_with_and_without_optimizer() {
        let model = WaveUNet::<f32>::build(small(), 5).unwrap();
        let mut ck = Checkpoint {
            config: small(),
            seed: 5,
            params: model.params().to_vec(),
            optimizer: None,
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"LFW1");
        assert_eq!(Checkpoint::read_from(&mut buf.as_slice()).unwrap(), ck);

        let mut state = AdamState::new(AdamConfig::with_lr(3e-4), &ck.params);
        state.step = 17;
        state.m[0].data_mut()[0] = 0.25;
        ck.optimizer = Some(state);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(Checkpoint::read_from(&mut buf.as_slice()).unwrap(), ck);
    }

    #[test]
    fn rejects_corruption() {
        let model = WaveUNet::<f32>::build(small(), 5).unwrap();
        let ck = Checkpoint {
            config: small(),
            seed: 5,
            params: model.into_params(),
            optimizer: None,
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(&mut bad.as_slice()).is_err());
        let short = &buf[..buf.len() - 3];
        assert!(Checkpoint::read_from(&mut &short[..]).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let m = ModelManifest {
            variant: ModelVariant::MultiNoEnv,
            seed: 42,
            conditioning_channels: 36,
            parameter_count: 1234,
            step: 50,
            config_hash: "00ff".into(),
        };
        assert_eq!(ModelManifest::parse(&m.to_text()).unwrap(), m);
    }
}
