//! Run manifests: what went in, what came out, under which settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digests(paths: &[PathBuf]) -> anyhow::Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect()
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> anyhow::Result<Self> {
        let config = serde_json::to_value(config)?;
        let canon = serde_json::to_string(&config)?;
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: hex(&Sha256::digest(canon.as_bytes())),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    /// Digest `inputs` and `outputs`, then write the manifest to `path`.
    pub fn write(mut self, path: &Path, inputs: &[PathBuf], outputs: &[PathBuf]) -> anyhow::Result<()> {
        self.inputs = digests(inputs)?;
        self.outputs = digests(outputs)?;
        let json = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// `<file>.manifest.json` next to a single-file output.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
