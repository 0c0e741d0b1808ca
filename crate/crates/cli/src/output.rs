//! Output files: written under a temporary name and renamed into place, plus
//! the per-command run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial"))
}

/// Files staged in memory and committed together, so a failed command leaves
/// none of them behind.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    /// File name to SHA-256 of the contents.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .map(|(p, b)| (file_name(p), sha256_hex(b)))
            .collect()
    }

    /// Writes every file to a temporary sibling, then renames each into place.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_at(dir, e))?;
            }
            let tmp = temp_path(path);
            if let Err(e) = fs::write(&tmp, bytes) {
                for t in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(io_at(&tmp, e));
            }
            staged.push(tmp);
        }
        for ((path, _), tmp) in self.files.iter().zip(&staged) {
            fs::rename(tmp, path).map_err(|e| io_at(path, e))?;
        }
        Ok(self.files.into_iter().map(|(p, _)| p).collect())
    }
}

pub fn io_at(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub dataset_schema: u32,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            dataset_schema: rtmsim_core::cohort::SCHEMA_VERSION,
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: cfg.clone(),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s.into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_leaves_only_final_names() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = OutputSet::default();
        set.add(dir.path().join("a.csv"), b"x\n".to_vec());
        set.add(dir.path().join("sub/b.csv"), b"y\n".to_vec());
        let hashes = set.hashes();
        set.commit().unwrap();
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), b"x\n");
        assert_eq!(fs::read(dir.path().join("sub/b.csv")).unwrap(), b"y\n");
        assert_eq!(hashes["a.csv"], sha256_hex(b"x\n"));
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
