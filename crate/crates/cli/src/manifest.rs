//! Run manifests: what went in, what came out, and how to redo it.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Every setting that shapes the outputs, flags and defaults alike.
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

/// Wall-clock time, or `SOURCE_DATE_EPOCH` when set so that reruns can be
/// byte-identical.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0));
    fixed
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Regular files under `dir`, recursively, sorted by path.
fn files_under(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Digest of a file, or of every file in a directory except manifests.
pub fn digest_inputs(path: &Path) -> Result<Vec<FileDigest>> {
    let files = if path.is_dir() {
        files_under(path)?
            .into_iter()
            .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST_FILE))
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    files
        .into_iter()
        .map(|p| {
            Ok(FileDigest {
                sha256: sha256_file(&p)?,
                path: p.display().to_string(),
            })
        })
        .collect()
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    started_at: String,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            started_at: timestamp(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.extend(digest_inputs(path)?);
        Ok(())
    }

    /// Digests everything in `out_dir` except earlier manifests and writes
    /// `manifest.json` there.
    pub fn finish(self, out_dir: &Path) -> Result<RunManifest> {
        let canonical = serde_json::to_vec(&self.config)?;
        let outputs = files_under(out_dir)?
            .into_iter()
            .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST_FILE))
            .map(|p| {
                let rel = p.strip_prefix(out_dir).unwrap_or(&p);
                Ok(FileDigest {
                    path: rel.to_string_lossy().replace('\\', "/"),
                    sha256: sha256_file(&p)?,
                })
            })
            .collect::<Result<_>>()?;
        let manifest = RunManifest {
            tool: "feedersim".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config_sha256: hex::encode(Sha256::digest(&canonical)),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs,
            started_at: self.started_at,
            finished_at: timestamp(),
        };
        let path = out_dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
