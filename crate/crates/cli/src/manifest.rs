//! Run manifests: what ran, with which inputs, and the SHA-256 of every
//! emitted artifact. Re-running with identical inputs must reproduce the
//! same digests.

use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::report::Json;

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub artifacts: Vec<(String, String)>, // (file name, sha256)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, out_dir: &Path) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: None,
            config_sha256: None,
            seed,
            out_dir: out_dir.to_path_buf(),
            artifacts: Vec::new(),
        }
    }

    pub fn with_config(mut self, path: &Path, raw: &[u8]) -> Self {
        self.config_path = Some(path.to_path_buf());
        self.config_sha256 = Some(sha256_hex(raw));
        self
    }

    /// Writes an artifact into the output directory and records its digest.
    pub fn emit(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.out_dir.join(name), contents)?;
        self.artifacts
            .push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    /// Writes `manifest.json` itself (not listed among the artifacts).
    pub fn finalize(&self) -> io::Result<()> {
        let artifacts = self
            .artifacts
            .iter()
            .map(|(name, digest)| {
                Json::obj(vec![
                    ("name", Json::Str(name.clone())),
                    ("sha256", Json::Str(digest.clone())),
                ])
            })
            .collect();
        let j = Json::obj(vec![
            ("subcommand", Json::Str(self.subcommand.clone())),
            (
                "config",
                match &self.config_path {
                    Some(p) => Json::Str(p.display().to_string()),
                    None => Json::Null,
                },
            ),
            (
                "config_sha256",
                match &self.config_sha256 {
                    Some(s) => Json::Str(s.clone()),
                    None => Json::Null,
                },
            ),
            ("seed", Json::Int(self.seed as i128)),
            ("artifacts", Json::Array(artifacts)),
        ]);
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.out_dir.join("manifest.json"), j.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
