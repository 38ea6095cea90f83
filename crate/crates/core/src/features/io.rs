//! `LFC1` feature files: one assembled conditioning tensor per segment.
//!
//! Layout, little-endian:
//!
//! ```text
//! "LFC1" u32 channels  u32 length  u32 id_len  id (UTF-8)
//! channels × length f32, channel-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::autodiff::io::{read_f32, read_u32, write_f32, write_u32};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"LFC1";
const MAX_ID_LEN: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    /// `channels × length`.
    pub conditioning: Tensor<f32>,
}

impl FeatureRecord {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let shape = self.conditioning.shape();
        w.write_all(FEATURE_MAGIC)?;
        write_u32(w, shape[0] as u32)?;
        write_u32(w, shape[1] as u32)?;
        write_u32(w, self.id.len() as u32)?;
        w.write_all(self.id.as_bytes())?;
        for &v in self.conditioning.data() {
            write_f32(w, v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format("feature file", "missing magic"))?;
        if &magic != FEATURE_MAGIC {
            return Err(Error::format("feature file", "bad magic"));
        }
        let channels = read_u32(r)? as usize;
        let length = read_u32(r)? as usize;
        let id_len = read_u32(r)? as usize;
        if channels == 0 || length == 0 || id_len > MAX_ID_LEN {
            return Err(Error::format("feature file", "implausible header"));
        }
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id)
            .map_err(|_| Error::format("feature file", "truncated id"))?;
        let id = String::from_utf8(id).map_err(|_| Error::format("feature file", "id is not UTF-8"))?;
        let data = (0..channels * length)
            .map(|_| read_f32(r))
            .collect::<Result<Vec<f32>>>()?;
        Ok(Self {
            id,
            conditioning: Tensor::new(vec![channels, length], data)?,
        })
    }
}

pub fn write_feature_file(path: impl AsRef<Path>, record: &FeatureRecord) -> Result<()> {
    let path = path.as_ref();
    if record.conditioning.shape().len() != 2 {
        return Err(Error::shape("feature file", "conditioning must be 2-D"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    record
        .write_to(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureRecord> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureRecord::read_from(&mut BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(
            id in "[a-z0-9_]{1,20}",
            channels in 1usize..5,
            data in prop::collection::vec(-2.0f32..2.0, 1..40),
        ) {
            let len = data.len();
            let full: Vec<f32> = (0..channels).flat_map(|c| data.iter().map(move |v| v + c as f32)).collect();
            let rec = FeatureRecord { id, conditioning: Tensor::new(vec![channels, len], full).unwrap() };
            let mut buf = Vec::new();
            rec.write_to(&mut buf).unwrap();
            prop_assert_eq!(&buf[..4], b"LFC1");
            prop_assert_eq!(FeatureRecord::read_from(&mut buf.as_slice()).unwrap(), rec);
        }
    }

    #[test]
    fn truncation_is_detected() {
        let rec = FeatureRecord {
            id: "x".into(),
            conditioning: Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap(),
        };
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        assert!(FeatureRecord::read_from(&mut &buf[..buf.len() - 1]).is_err());
    }
}
