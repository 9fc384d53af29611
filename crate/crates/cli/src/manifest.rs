use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one run: enough to repeat it and to check its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub version: String,
    /// Wall-clock seconds per phase, in the order the phases ran.
    pub timings: Vec<(String, f64)>,
    /// SHA-256 of every output file, keyed by path.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timings: Vec::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn seed(&mut self, phase: &str, seed: u64) {
        self.seeds.insert(phase.to_string(), seed);
    }

    /// Runs `f` and records its duration under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((phase.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    /// Writes `bytes` to `path` atomically and records its digest.
    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.insert(path.display().to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Manifest location for an output: `dir/manifest.json` for directories,
/// `file.manifest.json` next to a file.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp_name = path.file_name().context("output path has no file name")?.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Seed for `phase` derived from the run seed by a SplitMix64 step on the
/// seed plus a per-phase counter.
pub fn phase_seed(seed: u64, phase: u64) -> u64 {
    let mut z = seed.wrapping_add(phase.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod phase {
    pub const NETWORK: u64 = 0;
    pub const SAMPLE: u64 = 1;
    pub const PATTERNS: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const EVAL: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_seeds_differ_and_repeat() {
        let a: Vec<u64> = (0..6).map(|p| phase_seed(7, p)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 6);
        assert_eq!(phase_seed(7, 3), a[3]);
        assert_ne!(phase_seed(8, 3), a[3]);
    }

    #[test]
    fn manifest_paths() {
        assert_eq!(manifest_path(Path::new("out/data"), true), Path::new("out/data/manifest.json"));
        assert_eq!(manifest_path(Path::new("out/spec.json"), false), Path::new("out/spec.json.manifest.json"));
    }
}
