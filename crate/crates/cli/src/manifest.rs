//! `manifest.json` under the output directory: per command, the config hash,
//! the seed and a checksum of every artifact written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub config_sha256: String,
    pub tool_version: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Latest run of each command.
    pub runs: BTreeMap<String, RunRecord>,
}

pub fn file_sha256(path: &Path) -> Result<(u64, String), Failure> {
    let bytes = fs::read(path)?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Every file under `path` (or `path` itself), sorted.
fn files_under(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(path)? {
        out.extend(files_under(&entry?.path())?);
    }
    out.sort();
    Ok(out)
}

/// Records `artifacts` (files or directories under `out`) for `command`,
/// keeping other commands' entries.
pub fn record(out: &Path, command: &str, seed: u64, config_sha256: &str, artifacts: &[PathBuf]) -> Result<(), Failure> {
    let path = out.join(MANIFEST);
    let mut manifest: Manifest = match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_default(),
        Err(_) => Manifest::default(),
    };
    let mut list = Vec::new();
    for a in artifacts {
        for f in files_under(&out.join(a))? {
            let (bytes, sha256) = file_sha256(&f)?;
            let rel = f.strip_prefix(out).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            list.push(Artifact { path: rel, bytes, sha256 });
        }
    }
    manifest.runs.insert(
        command.to_string(),
        RunRecord {
            seed,
            config_sha256: config_sha256.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: list,
        },
    );
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::runtime(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_nested_files_and_keeps_other_runs() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("bank")).unwrap();
        fs::write(dir.path().join("bank/a.bin"), b"abc").unwrap();
        fs::write(dir.path().join("x.csv"), b"").unwrap();
        record(dir.path(), "simulate", 1, "h1", &["bank".into()]).unwrap();
        record(dir.path(), "eval", 2, "h2", &["x.csv".into()]).unwrap();
        let m: Manifest = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        let sim = &m.runs["simulate"];
        assert_eq!(sim.artifacts.len(), 1);
        assert_eq!(sim.artifacts[0].path, "bank/a.bin");
        assert_eq!(sim.artifacts[0].bytes, 3);
        assert_eq!(sim.artifacts[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(m.runs["eval"].seed, 2);
    }
}
