//! Run manifest: every emitted file plus the run parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dkg_core::gamma::InteractionPair;

use crate::config::RunConfig;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    /// `csv`, `json`, `field` or `data`.
    pub kind: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub grid: (usize, f64),
    pub times: Vec<f64>,
    pub masses: (f64, f64),
    pub interaction: Option<InteractionPair>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest lists {0}, which does not exist")]
    Missing(String),
    #[error("{0} has {1} bytes but the manifest records {2}")]
    Size(String, u64, u64),
    #[error("{0} is in the output directory but not in the manifest")]
    Unlisted(String),
    #[error("unsupported manifest version {0}")]
    Version(u32),
    #[error("file kind `{1}` of {0} is not one of csv, json, field, data")]
    Kind(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Checks a manifest against its directory: known version and kinds, every
/// listed file present with the recorded size, and no unlisted files.
pub fn validate(dir: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.manifest_version != MANIFEST_VERSION {
        return Err(ManifestError::Version(manifest.manifest_version));
    }
    for f in &manifest.files {
        if !["csv", "json", "field", "data"].contains(&f.kind.as_str()) {
            return Err(ManifestError::Kind(f.path.clone(), f.kind.clone()));
        }
        let meta = std::fs::metadata(dir.join(&f.path)).map_err(|_| ManifestError::Missing(f.path.clone()))?;
        if meta.len() != f.bytes {
            return Err(ManifestError::Size(f.path.clone(), meta.len(), f.bytes));
        }
    }
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name != MANIFEST_NAME && !manifest.files.iter().any(|f| f.path == name) {
            return Err(ManifestError::Unlisted(name));
        }
    }
    Ok(manifest)
}
