//! Run manifests: what a stage was run with and what it produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{write_json, IoError};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub seed: u64,
    /// SHA-256 of the effective configuration serialized as JSON.
    pub config_hash: String,
    /// Input path to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub counts: BTreeMap<String, usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String, IoError> {
    if path.is_dir() {
        // Directories hash as the digests of their files in name order.
        let mut names: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| IoError::Open {
                path: path.to_owned(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        let mut joined = String::new();
        for name in names {
            joined.push_str(&digest_file(&name)?);
        }
        return Ok(sha256_hex(joined.as_bytes()));
    }
    let bytes = fs::read(path).map_err(|source| IoError::Open {
        path: path.to_owned(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new<C: Serialize>(stage: &str, seed: u64, config: &C) -> Self {
        let config_json = serde_json::to_vec(config).expect("config serializes");
        RunManifest {
            stage: stage.to_owned(),
            seed,
            config_hash: sha256_hex(&config_json),
            inputs: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            counts: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, IoError> {
        let digest = digest_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(self)
    }

    pub fn count(&mut self, key: &str, n: usize) -> &mut Self {
        self.counts.insert(key.to_owned(), n);
        self
    }

    /// SHA-256 of the manifest's JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    /// Sidecar path for an output: `out.jsonl` → `out.jsonl.manifest.json`,
    /// and `dir/` → `dir/manifest.json`.
    pub fn sidecar(output: &Path) -> PathBuf {
        if output.is_dir() {
            output.join("manifest.json")
        } else {
            let mut name = output.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        }
    }

    /// Writes the manifest with its own hash next to `output` and returns
    /// the hash.
    pub fn write_for(&self, output: &Path) -> Result<String, IoError> {
        #[derive(Serialize)]
        struct Stamped<'a> {
            manifest_hash: String,
            #[serde(flatten)]
            manifest: &'a RunManifest,
        }
        let hash = self.hash();
        write_json(
            &Self::sidecar(output),
            &Stamped {
                manifest_hash: hash.clone(),
                manifest: self,
            },
        )?;
        Ok(hash)
    }
}
