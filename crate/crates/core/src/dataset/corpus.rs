//! Synthetic corpus on disk and the `path,bpm` loop manifest.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prepare::SourceLoop;
use super::synth::{synth_loop, LoopSpec};
use crate::audio::{read_wav, write_wav};
use crate::error::{Error, Result};

pub const CORPUS_MANIFEST: &str = "manifest.csv";
/// Generator parameters of every loop, for pattern-level checks.
pub const CORPUS_SPECS: &str = "specs.json";
const LOOP_DIR: &str = "loops";
pub const MAX_BARS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    /// Relative to the corpus directory.
    pub path: String,
    pub spec: LoopSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopManifestLine {
    pub path: PathBuf,
    pub bpm: f64,
}

/// Loop specs for a corpus of `count` loops of 1 to 4 bars.
pub fn corpus_specs(count: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let loop_seed = rng.random::<u64>();
            let bars = rng.random_range(1..=MAX_BARS);
            let id = format!("loop_{i:03}");
            CorpusEntry {
                path: format!("{LOOP_DIR}/{id}.wav"),
                id,
                spec: LoopSpec::random(loop_seed, bars),
            }
        })
        .collect()
}

/// Renders `count` loops into `dir/loops/`, and writes the manifest and
/// the spec list next to them.
pub fn generate_corpus(dir: impl AsRef<Path>, count: usize, seed: u64) -> Result<Vec<CorpusEntry>> {
    let dir = dir.as_ref();
    let loops = dir.join(LOOP_DIR);
    std::fs::create_dir_all(&loops).map_err(|e| Error::io(&loops, e))?;
    let entries = corpus_specs(count, seed);
    entries
        .par_iter()
        .map(|e| write_wav(dir.join(&e.path), &synth_loop(&e.spec)?))
        .collect::<Result<Vec<()>>>()?;
    let lines: Vec<LoopManifestLine> = entries
        .iter()
        .map(|e| LoopManifestLine {
            path: PathBuf::from(&e.path),
            bpm: e.spec.bpm,
        })
        .collect();
    write_loop_manifest(dir.join(CORPUS_MANIFEST), &lines)?;
    let path = dir.join(CORPUS_SPECS);
    let text = serde_json::to_string_pretty(&entries)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(entries)
}

pub fn write_loop_manifest(path: impl AsRef<Path>, lines: &[LoopManifestLine]) -> Result<()> {
    let path = path.as_ref();
    let text: String = lines
        .iter()
        .map(|l| format!("{},{}\n", l.path.display(), l.bpm))
        .collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses `path,bpm` lines; relative paths resolve against the manifest's
/// directory. Blank lines and `#` comments are ignored.
pub fn read_loop_manifest(path: impl AsRef<Path>) -> Result<Vec<LoopManifestLine>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    text.lines()
        .enumerate()
        .map(|(n, l)| (n, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, line)| {
            let bad = || Error::format("loop manifest", format!("line {}: `{line}`", n + 1));
            let (p, bpm) = line.rsplit_once(',').ok_or_else(bad)?;
            let bpm: f64 = bpm.trim().parse().map_err(|_| bad())?;
            if !(bpm.is_finite() && bpm > 0.0) {
                return Err(bad());
            }
            let p = Path::new(p.trim());
            Ok(LoopManifestLine {
                path: if p.is_absolute() { p.to_path_buf() } else { base.join(p) },
                bpm,
            })
        })
        .collect()
}

/// Reads every loop of a manifest; ids are file stems.
pub fn load_sources(manifest: impl AsRef<Path>) -> Result<Vec<SourceLoop>> {
    read_loop_manifest(manifest)?
        .into_iter()
        .map(|line| {
            let id = line
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| Error::invalid(format!("no file name in {}", line.path.display())))?;
            Ok(SourceLoop {
                id,
                audio: read_wav(&line.path)?,
                bpm: line.bpm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let lines = vec![
            LoopManifestLine { path: "a.wav".into(), bpm: 128.5 },
            LoopManifestLine { path: "b/c.wav".into(), bpm: 120.0 },
        ];
        let p = dir.path().join("m.csv");
        write_loop_manifest(&p, &lines).unwrap();
        let back = read_loop_manifest(&p).unwrap();
        assert_eq!(back[0].path, dir.path().join("a.wav"));
        assert_eq!(back[1].bpm, 120.0);
        std::fs::write(&p, "x.wav;120\n").unwrap();
        assert!(read_loop_manifest(&p).is_err());
        assert!(read_loop_manifest(dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn specs_are_in_range_and_seeded() {
        let a = corpus_specs(64, 7);
        assert_eq!(a, corpus_specs(64, 7));
        assert_ne!(a, corpus_specs(64, 8));
        for e in &a {
            assert!((120.0..=140.0).contains(&e.spec.bpm));
            assert!((1..=MAX_BARS).contains(&e.spec.bars));
        }
    }
}
