//! Run manifests: enough to reproduce a command's outputs bit for bit.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::formats::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(role: &str, path: &Path) -> Result<Self> {
        Ok(Self {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Every effective setting, defaults included.
    pub config: BTreeMap<String, String>,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    /// Output paths are relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub details: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, settings: &[(String, String)]) -> Self {
        Self {
            command: command.to_string(),
            version: version(),
            seed,
            config: settings.iter().cloned().collect(),
            config_sha256: sha256_hex(crate::config::render(settings).as_bytes()),
            inputs: Vec::new(),
            outputs: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(role, path)?);
        Ok(())
    }

    /// Records `name` inside `out_dir`.
    pub fn output(&mut self, out_dir: &Path, name: &str) -> Result<()> {
        let mut d = FileDigest::of(name, &out_dir.join(name))?;
        d.path = name.to_string();
        self.outputs.push(d);
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("manifest details are plain data");
        self.details.insert(key.to_string(), v);
    }

    pub fn input_path(&self, role: &str) -> Option<&FileDigest> {
        self.inputs.iter().find(|d| d.role == role)
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        write_json(&out_dir.join(MANIFEST_FILE), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }
}
