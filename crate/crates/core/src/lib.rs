//! Data-complexity indicators for classification datasets.
//!
//! Human indicators come from annotator vote counts. Model indicators come
//! from a pool of classifiers, each described by per-checkpoint and
//! per-layer class distributions stored in a [`PredictionBundle`]. The
//! [`stats`] module relates indicators to each other.

pub mod bundle;
pub mod conformal;
pub mod exec;
pub mod human;
pub mod indicators;
pub mod ingest;
pub mod model_free;
pub mod model_ref;
pub mod stats;
pub mod synth;
pub mod types;

#[cfg(feature = "oracle")]
#[doc(hidden)]
pub mod oracle;

pub use bundle::{ModelTensors, PredictionBundle};
pub use conformal::{ConformalError, Threshold, DEFAULT_ALPHAS};
pub use exec::Execution;
pub use human::TiedPlurality;
pub use indicators::{IndicatorFamily, IndicatorId, IndicatorTable};
pub use ingest::{load_bundle, write_bundle, IngestError};
pub use stats::StatsError;
pub use synth::{generate_pool, Coupling, PoolConfig, SynthError};
pub use types::{AnnotationRecord, IndicatorVector, LabelDistribution, LabelMode, ModelMeta, StatResult};
