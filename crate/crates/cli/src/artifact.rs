//! Provenance stamped on every output file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "cpxr-ptf";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the effective settings and command options.
    pub config_hash: String,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            config_hash: config_hash(config)?,
            inputs: BTreeMap::new(),
        })
    }

    pub fn with_input(mut self, role: &str, path: &Path) -> anyhow::Result<Self> {
        self.inputs.insert(role.into(), file_hash(path)?);
        Ok(self)
    }

    /// Comment lines written ahead of CSV output.
    pub fn write_comment(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "# tool={} version={} command={} seed={} config_hash={}",
            self.tool, self.version, self.command, self.seed, self.config_hash
        )?;
        for (role, hash) in &self.inputs {
            writeln!(w, "# input {role} sha256={hash}")?;
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(config: &impl Serialize) -> anyhow::Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

pub fn file_hash(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn hash_tracks_content() {
        let a = config_hash(&serde_json::json!({"rho": 0.45})).unwrap();
        assert_eq!(a, config_hash(&serde_json::json!({"rho": 0.45})).unwrap());
        assert_ne!(a, config_hash(&serde_json::json!({"rho": 0.5})).unwrap());
    }

    #[test]
    fn comment_lines() {
        let mut p = Provenance::new("train", 7, &1).unwrap();
        p.inputs.insert("data".into(), "ff".into());
        let mut out = Vec::new();
        p.write_comment(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# tool=cpxr-ptf version="));
        assert!(text.contains("command=train seed=7 config_hash="));
        assert!(text.ends_with("# input data sha256=ff\n"));
    }
}
