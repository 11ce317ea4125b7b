//! Run manifests and atomic output writes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Effective configuration in the format `--config` accepts.
    pub config: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub duration_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write via a temporary sibling and rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Collects inputs and outputs of one command, then writes the manifest.
pub struct Recorder {
    started: Instant,
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, out_dir: &Path, seed: Option<u64>, config: String) -> Self {
        Self {
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                duration_s: 0.0,
            },
        }
    }

    /// Read an input file and record its digest.
    pub fn read_input(&mut self, path: &Path) -> io::Result<Vec<u8>> {
        let bytes = fs::read(path)?;
        self.manifest.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    /// Write `bytes` to `name` inside the output directory.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.push(FileDigest::of(&path, bytes));
        Ok(path)
    }

    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.manifest.duration_s = self.started.elapsed().as_secs_f64();
        let json = serde_json::to_vec_pretty(&self.manifest).map_err(io::Error::other)?;
        let path = self.out_dir.join(format!("{}.manifest.json", self.manifest.command));
        write_atomic(&path, &json)?;
        Ok(path)
    }
}
