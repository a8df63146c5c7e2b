use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use newsstake::PipelineConfig;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Written next to every output so a run can be traced and repeated.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub config: PipelineConfig,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
}

pub struct Recorder {
    command: String,
    started: DateTime<Utc>,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Content digest of a directory: file names and contents in name order.
fn digest_dir(path: &Path) -> Result<String> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut hasher = Sha256::new();
    for p in entries {
        hasher.update(p.file_name().unwrap_or_default().as_encoded_bytes());
        hasher.update([0]);
        hasher.update(std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?);
        hasher.update([0]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Recorder {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Utc::now(),
            inputs: Vec::new(),
            seed: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = if path.is_dir() { digest_dir(path)? } else { digest_file(path)? };
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn optional_input(&mut self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) if p.exists() => self.input(p),
            _ => Ok(()),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn finish(self, config: &PipelineConfig, outputs: &[&Path], manifest_path: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            arguments: std::env::args().skip(1).collect(),
            config: config.clone(),
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            seed: self.seed,
            started_at: timestamp(self.started),
            finished_at: timestamp(Utc::now()),
        };
        let mut body = serde_json::to_string_pretty(&manifest)?;
        body.push('\n');
        std::fs::write(manifest_path, body).with_context(|| format!("writing {}", manifest_path.display()))
    }
}

/// `<out>.manifest.json`
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
