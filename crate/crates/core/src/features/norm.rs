//! Per-feature min-max statistics for the timbral descriptors.

use std::path::Path;

use crate::error::{Error, Result};

use super::timbral::{timbral_names, TIMBRAL_LEN};

#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub min: [f64; TIMBRAL_LEN],
    pub max: [f64; TIMBRAL_LEN],
}

impl NormStats {
    /// Min and max of each feature over `samples`.
    pub fn fit(samples: &[[f64; TIMBRAL_LEN]]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("cannot fit normalization on zero samples"));
        }
        let mut min = [f64::INFINITY; TIMBRAL_LEN];
        let mut max = [f64::NEG_INFINITY; TIMBRAL_LEN];
        for s in samples {
            for i in 0..TIMBRAL_LEN {
                if !s[i].is_finite() {
                    return Err(Error::invalid(format!("feature {i} is not finite")));
                }
                min[i] = min[i].min(s[i]);
                max[i] = max[i].max(s[i]);
            }
        }
        Ok(Self { min, max })
    }

    /// A feature whose range collapsed to a point; it normalizes to 0.
    pub fn is_degenerate(&self, i: usize) -> bool {
        self.max[i] <= self.min[i]
    }

    pub fn degenerate_features(&self) -> Vec<usize> {
        (0..TIMBRAL_LEN).filter(|&i| self.is_degenerate(i)).collect()
    }

    pub fn normalize_one(&self, i: usize, raw: f64) -> f64 {
        if self.is_degenerate(i) {
            return 0.0;
        }
        ((raw - self.min[i]) / (self.max[i] - self.min[i])).clamp(0.0, 1.0)
    }

    pub fn normalize(&self, raw: &[f64; TIMBRAL_LEN]) -> [f64; TIMBRAL_LEN] {
        std::array::from_fn(|i| self.normalize_one(i, raw[i]))
    }

    /// Raw value at normalized position `value` of feature `i`.
    pub fn denormalize_one(&self, i: usize, value: f64) -> f64 {
        self.min[i] + value * (self.max[i] - self.min[i]).max(0.0)
    }

    /// One `name min max` line per feature; floats use Rust's shortest
    /// round-trip formatting.
    pub fn to_text(&self) -> String {
        timbral_names()
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{n} {:?} {:?}\n", self.min[i], self.max[i]))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let names = timbral_names();
        let mut min = [0.0; TIMBRAL_LEN];
        let mut max = [0.0; TIMBRAL_LEN];
        let mut seen = [false; TIMBRAL_LEN];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::format("normalization stats", format!("line `{line}`"));
            if fields.len() != 3 {
                return Err(bad());
            }
            let i = names.iter().position(|n| n == fields[0]).ok_or_else(bad)?;
            min[i] = fields[1].parse().map_err(|_| bad())?;
            max[i] = fields[2].parse().map_err(|_| bad())?;
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::format(
                "normalization stats",
                format!("missing `{}`", names[i]),
            ));
        }
        Ok(Self { min, max })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_features_map_to_zero() {
        let mut a = [0.0; 21];
        let mut b = [0.0; 21];
        a[3] = 1.0;
        b[3] = 3.0;
        let s = NormStats::fit(&[a, b]).unwrap();
        assert_eq!(s.degenerate_features().len(), 20);
        assert_eq!(s.normalize_one(0, 5.0), 0.0);
        assert_eq!(s.normalize_one(3, 2.0), 0.5);
        assert_eq!(s.normalize_one(3, 9.0), 1.0);
    }

    #[test]
    fn empty_fit_is_an_error() {
        assert!(NormStats::fit(&[]).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(rows in prop::collection::vec(prop::array::uniform21(-1e3f64..1e3), 1..5)) {
            let s = NormStats::fit(&rows).unwrap();
            prop_assert_eq!(NormStats::parse(&s.to_text()).unwrap(), s.clone());
            for r in &rows {
                let n = s.normalize(r);
                prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
