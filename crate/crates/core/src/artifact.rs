//! Single-file pipeline artifacts.
//!
//! The file is a JSON envelope `{format_version, digest, payload}`. Numeric
//! blocks inside the payload are base64 little-endian doubles, so a
//! save/load cycle is bit-exact. `digest` is the SHA-256 of the payload
//! serialized compactly with sorted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{ClusterId, Taxonomy};
use crate::pipeline::Pipeline;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot access artifact {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt artifact: {0}")]
    Corrupt(String),
    #[error("corrupt artifact: digest mismatch (stored {stored}, computed {computed})")]
    DigestMismatch { stored: String, computed: String },
    #[error("unsupported artifact format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u64, supported: u32 },
}

/// What is needed to re-run training bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON form of the input dataset.
    pub dataset_sha256: String,
    pub seed: u64,
    /// The merged run configuration as flat keys.
    pub config: BTreeMap<String, Value>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifact {
    pub pipeline: Pipeline,
    pub taxonomy: Taxonomy,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u64,
    digest: String,
    payload: Value,
}

fn payload_digest(payload: &Value) -> String {
    // serde_json's map is ordered by key, so this rendering is canonical.
    let text = serde_json::to_string(payload).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl PipelineArtifact {
    pub fn validate(&self) -> Result<(), ArtifactError> {
        for &c in self.pipeline.classifier.classes() {
            let known = u8::try_from(c).is_ok_and(|c| self.taxonomy.contains(ClusterId(c)));
            if !known {
                return Err(ArtifactError::Corrupt(format!("class {c} is missing from the taxonomy")));
            }
        }
        if self.pipeline.classifier.n_features() != self.pipeline.featurizer.dim() {
            return Err(ArtifactError::Corrupt(
                "classifier and featurizer dimensionality differ".into(),
            ));
        }
        Ok(())
    }

    pub fn label(&self, cluster: u32) -> Option<&str> {
        u8::try_from(cluster).ok().and_then(|c| self.taxonomy.label(ClusterId(c)))
    }

    pub fn to_json(&self) -> String {
        let payload = serde_json::to_value(self).expect("artifact serializes");
        let env = Envelope {
            format_version: FORMAT_VERSION.into(),
            digest: payload_digest(&payload),
            payload,
        };
        let mut s = serde_json::to_string_pretty(&env).expect("envelope serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let raw: Value = serde_json::from_str(text).map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
        // The version is checked before anything else about the layout.
        let found = raw
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| ArtifactError::Corrupt("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(ArtifactError::UnsupportedVersion {
                found,
                supported: FORMAT_VERSION,
            });
        }
        let env: Envelope = serde_json::from_value(raw).map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
        let computed = payload_digest(&env.payload);
        if computed != env.digest {
            return Err(ArtifactError::DigestMismatch {
                stored: env.digest,
                computed,
            });
        }
        let artifact: PipelineArtifact =
            serde_json::from_value(env.payload).map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArtifactError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArtifactError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
