//! Run manifests: configuration snapshot, code version, seed, wall times and
//! a content hash per emitted data file. Reruns with identical inputs
//! produce byte-identical data files; the manifest's file hashes are the
//! witness.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<FileEntry>,
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: String,
    started: u64,
    out_dir: PathBuf,
    files: Vec<FileEntry>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, config: &str, out_dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(ManifestBuilder {
            command: command.to_string(),
            seed,
            config: config.to_string(),
            started: now_unix(),
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Write a data file under the output directory and record its hash.
    pub fn write_file(&mut self, name: &str, contents: &str) -> io::Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: format!("{:x}", hasher.finalize()),
            bytes: contents.len() as u64,
        });
        Ok(path)
    }

    /// Finalize and write `manifest.toml`.
    pub fn finish(self) -> io::Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            started_unix: self.started,
            finished_unix: now_unix(),
            files: self.files,
        };
        let text = toml::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(self.out_dir.join("manifest.toml"), text)?;
        Ok(manifest)
    }
}

/// Resolve the output directory: the environment variable `SPME_OUT`, when
/// set, overrides the root the configured directory is placed under.
pub fn resolve_out_dir(configured: &str) -> PathBuf {
    let configured = if configured.is_empty() {
        "runs/out"
    } else {
        configured
    };
    match std::env::var_os("SPME_OUT") {
        Some(root) => {
            let leaf = Path::new(configured)
                .file_name()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "out".to_string());
            Path::new(&root).join(leaf)
        }
        None => PathBuf::from(configured),
    }
}
