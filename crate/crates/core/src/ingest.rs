//! On-disk bundle format.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json
//! ckpt/<model_id>.f32     [checkpoint][item][class]
//! layers/<model_id>.f32   [layer][item][class]
//! ```
//!
//! Tensor files are headerless little-endian `f32`, row-major; their shape
//! lives in the manifest. Manifest keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `format_version` | always `1` |
//! | `pool_id` | free-form pool name |
//! | `k` | class count, must equal `class_names.len()` |
//! | `class_names` | label names in class-index order |
//! | `items[]` | `{ "item_id", "votes": [u32; k] }` |
//! | `models[]` | model metadata plus `checkpoint_tensor` and `layer_tensor` entries |
//!
//! Model metadata keys are `model_id`, `layer_count`, `checkpoint_count`,
//! `param_count` (0 = unknown), optional `plm_family` and `train_split_id`,
//! and `label_mode` (`hard`, `soft` or `unknown`). Tensor entries carry
//! `path` (relative to the bundle root), `dtype` (`"f32"`), `byte_order`
//! (`"little"`) and `shape` (`[checkpoints|layers, items, k]`).

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{ModelTensors, PredictionBundle};
use crate::exec::Execution;
use crate::types::{AnnotationRecord, ModelMeta};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no manifest at {0}")]
    ManifestMissing(PathBuf),
    #[error("manifest is not valid: {0}")]
    ManifestParse(String),
    #[error("{0}")]
    InvalidManifest(String),
    #[error("{tensor}: manifest declares {expected_bytes} bytes, found {actual_bytes}")]
    ShapeMismatch {
        tensor: String,
        expected_bytes: u64,
        actual_bytes: u64,
    },
    #[error("{tensor} tensor of model {model_id}, slice {slice}, item {item}: {reason}")]
    ProbabilityInvalid {
        model_id: String,
        tensor: &'static str,
        slice: usize,
        item: String,
        reason: String,
    },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("model {model_id}: final layer and final checkpoint disagree on item {item}")]
    FinalSliceMismatch { model_id: String, item: String },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    /// Stable machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::ManifestMissing(_) => "manifest_missing",
            IngestError::ManifestParse(_) => "manifest_parse",
            IngestError::InvalidManifest(_) => "invalid_manifest",
            IngestError::ShapeMismatch { .. } => "shape_mismatch",
            IngestError::ProbabilityInvalid { .. } => "probability_invalid",
            IngestError::DuplicateId { .. } => "duplicate_id",
            IngestError::FinalSliceMismatch { .. } => "final_slice_mismatch",
            IngestError::Io { .. } => "io_failure",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub path: String,
    pub dtype: String,
    pub byte_order: String,
    pub shape: Vec<usize>,
}

impl TensorEntry {
    fn f32(path: String, shape: Vec<usize>) -> Self {
        Self {
            path,
            dtype: "f32".into(),
            byte_order: "little".into(),
            shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelEntry {
    #[serde(flatten)]
    pub meta: ModelMeta,
    pub checkpoint_tensor: TensorEntry,
    pub layer_tensor: TensorEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub format_version: u32,
    #[serde(default)]
    pub pool_id: String,
    pub k: usize,
    pub class_names: Vec<String>,
    pub items: Vec<AnnotationRecord>,
    pub models: Vec<ModelEntry>,
}

impl BundleManifest {
    /// Manifest describing `bundle` with the default file layout.
    pub fn describe(bundle: &PredictionBundle) -> Self {
        let n = bundle.item_count();
        let k = bundle.k();
        let models = bundle
            .models()
            .iter()
            .map(|m| ModelEntry {
                meta: m.meta.clone(),
                checkpoint_tensor: TensorEntry::f32(
                    format!("ckpt/{}.f32", m.meta.model_id),
                    vec![m.meta.checkpoint_count, n, k],
                ),
                layer_tensor: TensorEntry::f32(
                    format!("layers/{}.f32", m.meta.model_id),
                    vec![m.meta.layer_count, n, k],
                ),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            pool_id: bundle.pool_id().to_string(),
            k,
            class_names: bundle.class_names().to_vec(),
            items: bundle.items().to_vec(),
            models,
        }
    }

    fn check_header(&self) -> Result<(), IngestError> {
        if self.format_version != FORMAT_VERSION {
            return Err(IngestError::InvalidManifest(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.k != self.class_names.len() {
            return Err(IngestError::InvalidManifest(format!(
                "k = {} but {} class names",
                self.k,
                self.class_names.len()
            )));
        }
        let n = self.items.len();
        for entry in &self.models {
            let meta = &entry.meta;
            for (tensor, depth) in [
                (&entry.checkpoint_tensor, meta.checkpoint_count),
                (&entry.layer_tensor, meta.layer_count),
            ] {
                if tensor.dtype != "f32" {
                    return Err(IngestError::InvalidManifest(format!(
                        "{}: unsupported dtype {:?}",
                        tensor.path, tensor.dtype
                    )));
                }
                if tensor.byte_order != "little" {
                    return Err(IngestError::InvalidManifest(format!(
                        "{}: unsupported byte order {:?}",
                        tensor.path, tensor.byte_order
                    )));
                }
                let expected = [depth, n, self.k];
                if tensor.shape != expected {
                    return Err(IngestError::ShapeMismatch {
                        tensor: tensor.path.clone(),
                        expected_bytes: expected.iter().product::<usize>() as u64 * 4,
                        actual_bytes: tensor.shape.iter().product::<usize>() as u64 * 4,
                    });
                }
                check_relative(&tensor.path)?;
            }
        }
        Ok(())
    }
}

fn check_relative(path: &str) -> Result<(), IngestError> {
    let ok = !path.is_empty()
        && Path::new(path)
            .components()
            .all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(IngestError::InvalidManifest(format!(
            "tensor path {path:?} must be relative to the bundle root"
        )))
    }
}

fn read_tensor(root: &Path, entry: &TensorEntry) -> Result<Vec<f32>, IngestError> {
    let path = root.join(&entry.path);
    let bytes = fs::read(&path).map_err(|e| IngestError::io(&path, e))?;
    let expected = entry.shape.iter().product::<usize>() as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(IngestError::ShapeMismatch {
            tensor: entry.path.clone(),
            expected_bytes: expected,
            actual_bytes: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Reads and fully validates a bundle directory.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<PredictionBundle, IngestError> {
    load_bundle_with(path, Execution::default())
}

pub fn load_bundle_with(
    path: impl AsRef<Path>,
    exec: Execution,
) -> Result<PredictionBundle, IngestError> {
    let root = path.as_ref();
    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(IngestError::ManifestMissing(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| IngestError::io(&manifest_path, e))?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| IngestError::ManifestParse(e.to_string()))?;
    manifest.check_header()?;

    let loaded = exec.map(manifest.models.len(), |i| {
        let entry = &manifest.models[i];
        Ok::<_, IngestError>(ModelTensors {
            meta: entry.meta.clone(),
            checkpoints: read_tensor(root, &entry.checkpoint_tensor)?,
            layers: read_tensor(root, &entry.layer_tensor)?,
        })
    });
    let models = loaded.into_iter().collect::<Result<Vec<_>, _>>()?;
    PredictionBundle::new(manifest.pool_id, manifest.class_names, manifest.items, models)
}

fn write_f32(path: &Path, data: &[f32]) -> Result<(), IngestError> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for x in data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| IngestError::io(path, e))
}

/// Writes `bundle` to `path` (created if absent).
pub fn write_bundle(bundle: &PredictionBundle, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let root = path.as_ref();
    for dir in [root.to_path_buf(), root.join("ckpt"), root.join("layers")] {
        fs::create_dir_all(&dir).map_err(|e| IngestError::io(&dir, e))?;
    }
    let manifest = BundleManifest::describe(bundle);
    for (entry, model) in manifest.models.iter().zip(bundle.models()) {
        write_f32(&root.join(&entry.checkpoint_tensor.path), &model.checkpoints)?;
        write_f32(&root.join(&entry.layer_tensor.path), &model.layers)?;
    }
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| IngestError::ManifestParse(e.to_string()))?;
    text.push('\n');
    let manifest_path = root.join(MANIFEST_FILE);
    fs::write(&manifest_path, text).map_err(|e| IngestError::io(&manifest_path, e))
}
