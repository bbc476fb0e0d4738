//! Report records and the flat-file cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

/// Environment variable naming the cache directory. Caching is off when it
/// is unset.
pub const CACHE_ENV: &str = "QUASILOC_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub experiment_id: String,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub config_hash: String,
    pub passed: bool,
    pub results: BTreeMap<String, f64>,
    /// Non-numeric results and non-finite values, as text.
    pub notes: BTreeMap<String, String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl ReportRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> LabResult<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Schema { field: "record".into(), message: e.to_string() })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    let tmp = tmp_sibling(path);
    std::fs::write(&tmp, bytes).map_err(|e| LabError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
}

pub type Artifact = (String, Vec<u8>);

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_dir(&self, hash: &str) -> PathBuf {
        self.root.join("runs").join(hash)
    }

    /// The stored record and artifact contents for `hash`.
    pub fn load_run(&self, hash: &str) -> Option<(ReportRecord, Vec<Artifact>)> {
        let dir = self.run_dir(hash);
        let record = ReportRecord::from_json(&std::fs::read_to_string(dir.join("record.json")).ok()?).ok()?;
        let mut artifacts = Vec::new();
        for name in &record.artifacts {
            artifacts.push((name.clone(), std::fs::read(dir.join("artifacts").join(name)).ok()?));
        }
        Some((record, artifacts))
    }

    /// Stores a run by filling a temporary directory and renaming it into
    /// place. A concurrent writer that got there first wins.
    pub fn store_run(&self, record: &ReportRecord, artifacts: &[Artifact]) -> LabResult<()> {
        let dir = self.run_dir(&record.config_hash);
        if dir.exists() {
            return Ok(());
        }
        let tmp = tmp_sibling(&dir);
        let art = tmp.join("artifacts");
        std::fs::create_dir_all(&art).map_err(|e| LabError::io(&art, e))?;
        for (name, bytes) in artifacts {
            std::fs::write(art.join(name), bytes).map_err(|e| LabError::io(art.join(name), e))?;
        }
        std::fs::write(tmp.join("record.json"), record.to_json()).map_err(|e| LabError::io(&tmp, e))?;
        if std::fs::rename(&tmp, &dir).is_err() {
            let _ = std::fs::remove_dir_all(&tmp);
        }
        Ok(())
    }

    fn value_path(&self, namespace: &str, key: &str) -> PathBuf {
        self.root.join(namespace).join(format!("{}.json", sha256_hex(key.as_bytes())))
    }

    pub fn get<T: DeserializeOwned>(&self, namespace: &str, key: &str) -> Option<T> {
        let text = std::fs::read_to_string(self.value_path(namespace, key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put<T: Serialize>(&self, namespace: &str, key: &str, value: &T) -> LabResult<()> {
        let text = serde_json::to_string(value).expect("cache value serializes");
        atomic_write(&self.value_path(namespace, key), text.as_bytes())
    }
}
