use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
const DTYPE: &str = "f32le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub layer_id: u32,
    pub dim: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub checkpoint_id: u32,
    pub epoch: u32,
    /// Per-step learning rate in effect at this checkpoint.
    pub learning_rate: f64,
    pub shuffle_seed: u64,
    /// Shard location, relative to the manifest's directory.
    pub shard_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientManifest {
    pub version: u32,
    pub n_examples: u32,
    pub dtype: String,
    pub layers: Vec<LayerSpec>,
    pub checkpoints: Vec<CheckpointMeta>,
}

impl GradientManifest {
    pub fn new(n_examples: u32, layers: Vec<LayerSpec>, checkpoints: Vec<CheckpointMeta>) -> Self {
        GradientManifest {
            version: MANIFEST_VERSION,
            n_examples,
            dtype: DTYPE.to_string(),
            layers,
            checkpoints,
        }
    }

    /// Parse and validate a manifest file. Shards are not touched.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::NotFound(format!("manifest {}", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        let manifest: GradientManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("manifest {}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Write the manifest as pretty JSON via temp file and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        if self.dtype != DTYPE {
            return Err(Error::Format(format!("unsupported dtype {:?}", self.dtype)));
        }
        if self.n_examples == 0 {
            return Err(Error::Format("n_examples must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Format("manifest lists no layers".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.layer_id as usize != i {
                return Err(Error::Format(format!(
                    "layer ids must be contiguous from 0 (position {i} has id {})",
                    layer.layer_id
                )));
            }
            if layer.dim == 0 {
                return Err(Error::Format(format!("layer {i} has dim 0")));
            }
        }
        let mut seen = HashSet::new();
        for ckpt in &self.checkpoints {
            if !seen.insert(ckpt.checkpoint_id) {
                return Err(Error::Format(format!(
                    "duplicate checkpoint id {}",
                    ckpt.checkpoint_id
                )));
            }
            if !(ckpt.learning_rate > 0.0 && ckpt.learning_rate.is_finite()) {
                return Err(Error::Format(format!(
                    "checkpoint {} has non-positive learning rate",
                    ckpt.checkpoint_id
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<u32> {
        self.layers.iter().map(|l| l.dim).collect()
    }

    /// Sum of layer dims: the per-example payload length in floats.
    pub fn total_dim(&self) -> u64 {
        self.layers.iter().map(|l| u64::from(l.dim)).sum()
    }

    pub fn checkpoint(&self, checkpoint_id: u32) -> Result<&CheckpointMeta> {
        self.checkpoints
            .iter()
            .find(|c| c.checkpoint_id == checkpoint_id)
            .ok_or_else(|| Error::Range(format!("unknown checkpoint {checkpoint_id}")))
    }

    pub fn checkpoint_ids(&self) -> Vec<u32> {
        self.checkpoints.iter().map(|c| c.checkpoint_id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GradientManifest {
        GradientManifest::new(
            3,
            vec![LayerSpec { layer_id: 0, dim: 4 }, LayerSpec { layer_id: 1, dim: 2 }],
            vec![CheckpointMeta {
                checkpoint_id: 0,
                epoch: 0,
                learning_rate: 0.1,
                shuffle_seed: u64::MAX,
                shard_path: "ckpt_0.gshd".into(),
            }],
        )
    }

    #[test]
    fn schema_field_names() {
        let v: serde_json::Value = serde_json::to_value(sample()).unwrap();
        assert_eq!(v["dtype"], "f32le");
        assert_eq!(v["layers"][1]["dim"], 2);
        assert_eq!(v["checkpoints"][0]["shuffle_seed"].as_u64(), Some(u64::MAX));
        assert_eq!(v["checkpoints"][0]["shard_path"], "ckpt_0.gshd");
    }

    #[test]
    fn rejects_gapped_layers_and_bad_lr() {
        let mut m = sample();
        m.layers[1].layer_id = 2;
        assert!(matches!(m.validate(), Err(Error::Format(_))));
        let mut m = sample();
        m.checkpoints[0].learning_rate = 0.0;
        assert!(m.validate().is_err());
        let mut m = sample();
        m.checkpoints.push(m.checkpoints[0].clone());
        assert!(m.validate().is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        sample().save(&path).unwrap();
        assert_eq!(GradientManifest::load(&path).unwrap(), sample());
    }
}
