//! Run manifests: a JSON file written next to every output artifact that
//! records the command, its parameters, and SHA-256 digests of inputs and
//! outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    /// Every stage parameter, seed and backend name the command used.
    pub config: serde_json::Value,
    /// Path to hex SHA-256. Directories contribute one entry per file.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub started_at_ms: u64,
    pub finished_at_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Digests for a file, or for each regular file directly inside a directory.
pub fn digest_path(path: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.is_file() {
                out.insert(p.display().to_string(), sha256_file(&p)?);
            }
        }
    } else {
        out.insert(path.display().to_string(), sha256_file(path)?);
    }
    Ok(out)
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl RunManifest {
    pub fn start(run_id: impl Into<String>, command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            run_id: run_id.into(),
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_at_ms: now_ms(),
            finished_at_ms: 0,
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.extend(digest_path(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.extend(digest_path(path)?);
        Ok(())
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(p, d)| sha256_file(Path::new(p)).map(|now| &now != *d).unwrap_or(true))
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Stamps the finish time and writes the manifest beside `artifact`.
    pub fn finish(mut self, artifact: &Path) -> std::io::Result<PathBuf> {
        self.finished_at_ms = now_ms();
        let path = manifest_path(artifact);
        let text = serde_json::to_string_pretty(&self).expect("manifest serialize");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
