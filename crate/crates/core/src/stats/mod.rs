//! Rank correlation, Mann-Whitney U, least-squares R², and the partitioned
//! analyses built on them.

mod analysis;
mod correlation;
mod mann_whitney;
mod rank;

use thiserror::Error;

pub use analysis::{
    correlation_matrix, match_rate_effect, partition_by_pool_success, r2_matrix, CorrelationTable,
    Grouping, Partition, PartitionRule,
};
pub use correlation::{ols_r2, pearson, spearman};
pub use mann_whitney::{mann_whitney, mann_whitney_with, Alternative, MannWhitneyOptions, EXACT_PAIR_LIMIT};
pub use rank::{average_ranks, TIE_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} observations, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("input has zero rank variance")]
    DegenerateInput,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("a comparison group is empty")]
    EmptyGroup,
    #[error("models lack {0} metadata")]
    MissingMetadata(&'static str),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::LengthMismatch(..) => "length_mismatch",
            StatsError::TooFewSamples { .. } => "too_few_samples",
            StatsError::DegenerateInput => "degenerate_input",
            StatsError::NonFinite => "non_finite",
            StatsError::EmptyGroup => "empty_group",
            StatsError::MissingMetadata(_) => "missing_metadata",
        }
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}
