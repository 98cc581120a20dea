use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance sidecar written next to every command output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliReport {
    pub command: String,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    /// sha256 over the per-input digests, in argument order.
    pub inputs_digest: String,
    pub seed: u64,
    pub execution: String,
    pub outputs: Vec<PathBuf>,
}

impl CliReport {
    pub fn new(command: &str, seed: u64, execution: &str) -> Self {
        CliReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            inputs_digest: hex(&Sha256::digest(b"")),
            seed,
            execution: execution.to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = file_sha256(path)?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256,
        });
        let mut h = Sha256::new();
        for i in &self.inputs {
            h.update(i.sha256.as_bytes());
        }
        self.inputs_digest = hex(&h.finalize());
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// `<out>.report.json`
    pub fn sidecar_path(out: &Path) -> PathBuf {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".report.json");
        out.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(mushra_core::Error::from)?;
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader
            .read(&mut buf)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
