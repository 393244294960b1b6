//! Self-contained model files.
//!
//! A model file is a one-line text header `CRA-MODEL v<N>` followed by a JSON
//! body. Loading refuses any version other than [`ARTIFACT_VERSION`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Algorithm, AlgorithmConfig, Classifier};
use crate::features::Discretizer;
use crate::textfeat::Vectorizer;

pub const ARTIFACT_VERSION: u32 = 1;
const MAGIC: &str = "CRA-MODEL v";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("cannot read or write model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (missing header)")]
    BadHeader,
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model body: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub artifact_version: u32,
    pub algorithm: Algorithm,
    pub hyperparams: AlgorithmConfig,
    pub seed: u64,
    pub vectorizer: Vectorizer,
    pub discretizer: Discretizer,
    /// Feature ids in canonical order.
    pub selected_features: Vec<String>,
    pub classifier: Classifier,
    pub lexicon_versions: BTreeMap<String, Option<String>>,
    pub training_samples: usize,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{MAGIC}{}\n", self.artifact_version).into_bytes();
        serde_json::to_writer(&mut out, self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel, ArtifactError> {
        let split = bytes.iter().position(|&b| b == b'\n').ok_or(ArtifactError::BadHeader)?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| ArtifactError::BadHeader)?;
        let found: u32 = header
            .trim_end()
            .strip_prefix(MAGIC)
            .and_then(|v| v.parse().ok())
            .ok_or(ArtifactError::BadHeader)?;
        if found != ARTIFACT_VERSION {
            return Err(ArtifactError::VersionMismatch { found, expected: ARTIFACT_VERSION });
        }
        let model: TrainedModel = serde_json::from_slice(&bytes[split + 1..])?;
        if model.artifact_version != found {
            return Err(ArtifactError::VersionMismatch {
                found: model.artifact_version,
                expected: ARTIFACT_VERSION,
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<TrainedModel, ArtifactError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Content hash identifying this model in stored predictions.
    pub fn model_version(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        format!("{}-{}", self.algorithm, &hex::encode(digest)[..16])
    }
}
