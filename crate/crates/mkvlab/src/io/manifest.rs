//! Provenance manifests and atomic output staging.
//!
//! A run writes everything into a hidden staging directory next to the
//! requested output directory and renames it into place at the end, so an
//! interrupted run leaves no partial output directory behind. The manifest
//! is written last, inside the staged directory, and lists every other
//! file with its SHA-256 checksum; it cannot contain its own hash, so it
//! is the one file excluded from its listing. Wall-clock data lives only
//! here, keeping every other artifact byte-reproducible across reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// File name of the manifest inside every output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// How a dispatched run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Error { message: String, exit_code: i32 },
}

/// One output file with its content checksum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance record emitted for every run, success or failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario: String,
    /// SHA-256 of the resolved configuration (output directory excluded).
    pub config_digest: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub status: RunStatus,
    pub outputs: Vec<OutputRecord>,
}

/// Milliseconds since the Unix epoch.
pub(crate) fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Hex SHA-256 of a byte slice.
pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Checksums every file under `dir` (sorted by relative path), except the
/// manifest itself.
pub(crate) fn hash_outputs(dir: &Path) -> Result<Vec<OutputRecord>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    files
        .into_iter()
        .filter(|rel| rel != MANIFEST_FILE)
        .map(|rel| {
            let bytes = fs::read(dir.join(&rel))?;
            Ok(OutputRecord {
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
                path: rel,
            })
        })
        .collect()
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .map_err(|e| Error::Config(format!("path escapes output dir: {e}")))?;
            out.push(rel.to_string_lossy().into_owned());
        }
    }
    Ok(())
}

/// Staging directory that becomes the output directory on commit and is
/// removed on drop otherwise.
#[derive(Debug)]
pub(crate) struct StagingDir {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagingDir {
    /// Creates the staging sibling of `target`; refuses an existing target
    /// so a finished run is never silently overwritten.
    pub(crate) fn create(target: &Path) -> Result<Self> {
        if target.exists() {
            return Err(Error::Config(format!(
                "output directory {} already exists; choose a fresh one",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("output path {} has no name", target.display())))?
            .to_string_lossy()
            .into_owned();
        let staging = target.with_file_name(format!(".{name}.staging"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(StagingDir { staging, target: target.to_path_buf(), committed: false })
    }

    pub(crate) fn path(&self) -> &Path {
        &self.staging
    }

    /// Renames the staged directory into place.
    pub(crate) fn commit(mut self) -> Result<PathBuf> {
        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagingDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_the_empty_string_matches_the_published_value() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn staging_commits_atomically_and_cleans_up_on_drop() {
        let base = std::env::temp_dir().join(format!("mkvlab-staging-{}", std::process::id()));
        let _ = fs::remove_dir_all(&base);
        fs::create_dir_all(&base).unwrap();
        let target = base.join("out");

        {
            let staging = StagingDir::create(&target).unwrap();
            fs::write(staging.path().join("a.txt"), "alpha").unwrap();
            assert!(!target.exists(), "target must not appear before commit");
        }
        assert!(!target.exists(), "dropped staging must vanish");

        let staging = StagingDir::create(&target).unwrap();
        fs::write(staging.path().join("a.txt"), "alpha").unwrap();
        let committed = staging.commit().unwrap();
        assert_eq!(committed, target);
        assert_eq!(fs::read_to_string(target.join("a.txt")).unwrap(), "alpha");

        let err = StagingDir::create(&target).unwrap_err();
        assert!(err.to_string().contains("already exists"), "{err}");
        fs::remove_dir_all(&base).unwrap();
    }

    #[test]
    fn output_hashing_walks_subdirectories_and_skips_the_manifest() {
        let base = std::env::temp_dir().join(format!("mkvlab-hash-{}", std::process::id()));
        let _ = fs::remove_dir_all(&base);
        fs::create_dir_all(base.join("sub")).unwrap();
        fs::write(base.join("b.csv"), "x").unwrap();
        fs::write(base.join("sub/a.json"), "y").unwrap();
        fs::write(base.join(MANIFEST_FILE), "{}").unwrap();
        let records = hash_outputs(&base).unwrap();
        let paths: Vec<&str> = records.iter().map(|r| r.path.as_str()).collect();
        assert_eq!(paths, ["b.csv", "sub/a.json"]);
        assert_eq!(records[0].sha256, sha256_hex(b"x"));
        fs::remove_dir_all(&base).unwrap();
    }
}
