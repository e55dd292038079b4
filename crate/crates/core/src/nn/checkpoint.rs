//! Checkpoint persistence.
//!
//! A checkpoint file is a [`crate::container`] with magic `MDNACKPT` whose JSON
//! header is
//!
//! ```json
//! {"formatVersion":1,"id":"...","arch":{...},"lineage":{...},"metrics":{...},
//!  "tensors":[{"name":"layers.0.weight","shape":[32,8]}, ...]}
//! ```
//!
//! followed by the tensors' `f32` values, little-endian, in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::ArchDescriptor;
use super::model::LayeredModel;
use crate::container::{self, CHECKPOINT_MAGIC};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Lineage {
    /// Id of the checkpoint this model was initialized from; `None` for random init.
    pub init_from: Option<String>,
    pub trained_on_task_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Metrics {
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub id: String,
    pub model: LayeredModel,
    pub lineage: Lineage,
    pub metrics: Metrics,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Header {
    format_version: u32,
    id: String,
    arch: ArchDescriptor,
    lineage: Lineage,
    metrics: Metrics,
    tensors: Vec<TensorInfo>,
}

impl Checkpoint {
    pub fn new(id: impl Into<String>, model: LayeredModel, lineage: Lineage, metrics: Metrics) -> Self {
        Self {
            id: id.into(),
            model,
            lineage,
            metrics,
        }
    }

    pub fn arch(&self) -> &ArchDescriptor {
        self.model.arch()
    }

    fn header(&self) -> Header {
        Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            id: self.id.clone(),
            arch: self.model.arch().clone(),
            lineage: self.lineage.clone(),
            metrics: self.metrics.clone(),
            tensors: self
                .model
                .named_params()
                .into_iter()
                .map(|(name, shape, _)| TensorInfo { name, shape })
                .collect(),
        }
    }

    fn payload(&self) -> Vec<f32> {
        self.model.params().iter().map(|&v| v as f32).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        container::encode(CHECKPOINT_MAGIC, &self.header(), &self.payload())
    }

    /// SHA-256 (hex) of the serialized checkpoint.
    pub fn content_hash(&self) -> Result<String> {
        Ok(container::hash_bytes(&self.to_bytes()?))
    }

    /// Writes the checkpoint and returns its content hash.
    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &bytes)?;
        Ok(container::hash_bytes(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, values): (Header, Vec<f32>) =
            container::decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_FORMAT_VERSION, |h: &Header| {
                h.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum()
            })?;
        header.arch.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        let params: Vec<f64> = values.into_iter().map(f64::from).collect();
        let model = LayeredModel::from_params(header.arch, params).map_err(|e| Error::Corrupt(e.to_string()))?;
        let expected: Vec<(String, Vec<usize>)> =
            model.named_params().into_iter().map(|(n, s, _)| (n, s)).collect();
        let declared: Vec<(String, Vec<usize>)> = header.tensors.into_iter().map(|t| (t.name, t.shape)).collect();
        if expected != declared {
            return Err(Error::Corrupt("tensor table does not match the architecture".into()));
        }
        Ok(Self {
            id: header.id,
            model,
            lineage: header.lineage,
            metrics: header.metrics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let arch = ArchDescriptor::mlp_classifier(3, &[5], 2).unwrap();
        let model = LayeredModel::build(arch, 11).unwrap().eval();
        Checkpoint::new(
            "ft-1",
            model,
            Lineage {
                init_from: Some("source".into()),
                trained_on_task_id: "task-a".into(),
                seed: 11,
            },
            Metrics::default(),
        )
    }

    #[test]
    fn byte_round_trip_is_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back.model.params(), ck.model.params());
        assert_eq!(back.lineage, ck.lineage);
        assert_eq!(back.id, "ft-1");
    }

    #[test]
    fn renamed_tensor_is_corrupt() {
        let mut bytes = sample().to_bytes().unwrap();
        let pat = b"layers.0.weight";
        let pos = bytes.windows(pat.len()).position(|w| w == pat).unwrap();
        bytes[pos + 7] = b'9';
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Corrupt(_)), "{err}");
    }
}
