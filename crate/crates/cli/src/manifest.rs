//! Output files and the run manifest that describes them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Digest of one emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// How per-run seeds derive from the master seed.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRecord {
    pub master_seed: Option<u64>,
    /// Description of the stream assignment.
    pub scheme: String,
    /// (label, ChaCha stream) for every run.
    pub streams: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// The configuration with every default written in.
    pub config: RunConfig,
    /// Values computed from the configuration, e.g. a step size chosen by rule.
    pub resolved: serde_json::Value,
    pub seeds: SeedRecord,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub runtime_seconds: f64,
    pub outputs: Vec<FileDigest>,
}

/// Collects emitted files so they can be digested, or removed on failure.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn digests(&self) -> Result<Vec<FileDigest>, CliError> {
        self.written
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?;
                Ok(FileDigest {
                    path: p.file_name().expect("file").to_string_lossy().into_owned(),
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                })
            })
            .collect()
    }

    /// Deletes everything written so far.
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_FILE));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Re-hashes every output listed in a manifest file and reports mismatches.
pub fn verify_manifest(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Io(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut bad = Vec::new();
    for out in value["outputs"].as_array().cloned().unwrap_or_default() {
        let name = out["path"].as_str().unwrap_or_default();
        let want = out["sha256"].as_str().unwrap_or_default();
        match fs::read(dir.join(name)) {
            Ok(bytes) if sha256_hex(&bytes) == want => {}
            _ => bad.push(name.to_string()),
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_string() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn discard_removes_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path()).unwrap();
        out.write("a.csv", "x\n").unwrap();
        assert_eq!(out.digests().unwrap()[0].bytes, 2);
        out.discard();
        assert!(!dir.path().join("a.csv").exists());
    }
}
