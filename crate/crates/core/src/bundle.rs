//! In-memory prediction bundle: annotations plus per-model checkpoint and
//! layer probability tensors.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::ingest::{BundleManifest, IngestError};
use crate::types::{check_probabilities, AnnotationRecord, ModelMeta, STORAGE_TOLERANCE};

/// Probability tensors for one model, row-major `f32`.
///
/// `checkpoints` is laid out `[checkpoint][item][class]` and `layers`
/// `[layer][item][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTensors {
    pub meta: ModelMeta,
    pub checkpoints: Vec<f32>,
    pub layers: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pool_id: String,
    class_names: Vec<String>,
    items: Vec<AnnotationRecord>,
    models: Vec<ModelTensors>,
}

impl PredictionBundle {
    /// Builds a bundle, checking every structural and probabilistic invariant.
    pub fn new(
        pool_id: impl Into<String>,
        class_names: Vec<String>,
        items: Vec<AnnotationRecord>,
        models: Vec<ModelTensors>,
    ) -> Result<Self, IngestError> {
        let bundle = Self {
            pool_id: pool_id.into(),
            class_names,
            items,
            models,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    fn validate(&self) -> Result<(), IngestError> {
        let k = self.k();
        if k < 2 {
            return Err(IngestError::InvalidManifest(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if self.items.is_empty() {
            return Err(IngestError::InvalidManifest("bundle has no items".into()));
        }
        if self.models.is_empty() {
            return Err(IngestError::InvalidManifest("bundle has no models".into()));
        }

        let mut seen = HashSet::new();
        for record in &self.items {
            if !seen.insert(record.item_id.as_str()) {
                return Err(IngestError::DuplicateId {
                    kind: "item",
                    id: record.item_id.clone(),
                });
            }
            if record.votes.len() != k {
                return Err(IngestError::InvalidManifest(format!(
                    "item {} has {} vote counts, expected {k}",
                    record.item_id,
                    record.votes.len()
                )));
            }
            if record.n() == 0 {
                return Err(IngestError::InvalidManifest(format!(
                    "item {} has no annotations",
                    record.item_id
                )));
            }
        }

        let mut seen = HashSet::new();
        let n = self.items.len();
        for model in &self.models {
            let meta = &model.meta;
            if !seen.insert(meta.model_id.as_str()) {
                return Err(IngestError::DuplicateId {
                    kind: "model",
                    id: meta.model_id.clone(),
                });
            }
            validate_model_id(&meta.model_id)?;
            if meta.layer_count == 0 || meta.checkpoint_count == 0 {
                return Err(IngestError::InvalidManifest(format!(
                    "model {} needs at least one layer and one checkpoint",
                    meta.model_id
                )));
            }
            let expect_ckpt = meta.checkpoint_count * n * k;
            if model.checkpoints.len() != expect_ckpt {
                return Err(IngestError::ShapeMismatch {
                    tensor: format!("checkpoint tensor of {}", meta.model_id),
                    expected_bytes: expect_ckpt as u64 * 4,
                    actual_bytes: model.checkpoints.len() as u64 * 4,
                });
            }
            let expect_layers = meta.layer_count * n * k;
            if model.layers.len() != expect_layers {
                return Err(IngestError::ShapeMismatch {
                    tensor: format!("layer tensor of {}", meta.model_id),
                    expected_bytes: expect_layers as u64 * 4,
                    actual_bytes: model.layers.len() as u64 * 4,
                });
            }
            for (tensor, data) in [("checkpoint", &model.checkpoints), ("layer", &model.layers)] {
                for (row_idx, row) in data.chunks_exact(k).enumerate() {
                    if let Err(err) = check_probabilities(row, STORAGE_TOLERANCE) {
                        return Err(IngestError::ProbabilityInvalid {
                            model_id: meta.model_id.clone(),
                            tensor,
                            slice: row_idx / n,
                            item: self.items[row_idx % n].item_id.clone(),
                            reason: err.to_string(),
                        });
                    }
                }
            }
            let last_ckpt = &model.checkpoints[(meta.checkpoint_count - 1) * n * k..];
            let last_layer = &model.layers[(meta.layer_count - 1) * n * k..];
            for (idx, (a, b)) in last_ckpt.iter().zip(last_layer).enumerate() {
                if (f64::from(*a) - f64::from(*b)).abs() > STORAGE_TOLERANCE {
                    return Err(IngestError::FinalSliceMismatch {
                        model_id: meta.model_id.clone(),
                        item: self.items[idx / k].item_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn pool_id(&self) -> &str {
        &self.pool_id
    }

    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn items(&self) -> &[AnnotationRecord] {
        &self.items
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn models(&self) -> &[ModelTensors] {
        &self.models
    }

    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn meta(&self, model: usize) -> &ModelMeta {
        &self.models[model].meta
    }

    /// Probabilities of `model` at 0-based `checkpoint` for `item`.
    pub fn checkpoint_probs(&self, model: usize, checkpoint: usize, item: usize) -> &[f32] {
        let k = self.k();
        let start = (checkpoint * self.items.len() + item) * k;
        &self.models[model].checkpoints[start..start + k]
    }

    /// Logit-lens probabilities of `model` at 0-based `layer` for `item`.
    pub fn layer_probs(&self, model: usize, layer: usize, item: usize) -> &[f32] {
        let k = self.k();
        let start = (layer * self.items.len() + item) * k;
        &self.models[model].layers[start..start + k]
    }

    /// The fully trained model's output: final checkpoint slice.
    pub fn final_probs(&self, model: usize, item: usize) -> &[f32] {
        let last = self.models[model].meta.checkpoint_count - 1;
        self.checkpoint_probs(model, last, item)
    }

    /// SHA-256 over the canonical manifest and all tensor bytes.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        let manifest = BundleManifest::describe(self);
        hasher.update(serde_json::to_vec(&manifest).expect("manifest serializes"));
        for model in &self.models {
            for x in model.checkpoints.iter().chain(&model.layers) {
                hasher.update(x.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn validate_model_id(id: &str) -> Result<(), IngestError> {
    let bad = id.is_empty()
        || id == "."
        || id == ".."
        || id.contains(['/', '\\', '\0']);
    if bad {
        return Err(IngestError::InvalidManifest(format!(
            "model id {id:?} is not usable as a file name"
        )));
    }
    Ok(())
}
