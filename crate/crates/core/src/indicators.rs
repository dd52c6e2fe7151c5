//! The full indicator battery over a bundle.

use std::fmt;
use std::str::FromStr;

use crate::bundle::PredictionBundle;
use crate::conformal::{cp_set_size_indicator, ConformalError};
use crate::exec::Execution;
use crate::human::{dissensus_indicator, entropy_indicator, majority_labels};
use crate::model_free::{avg_model_entropy_indicator, pool_dissensus_indicator, pool_entropy_indicator};
use crate::model_ref::{
    avg_probability_mass_indicator, checkpoint_failure_rate, failure_rate_indicator,
    first_checkpoint_indicator, first_layer_indicator,
};
use crate::types::IndicatorVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndicatorId {
    HumanDissensus,
    HumanEntropy,
    PoolDissensus,
    PoolEntropy,
    AvgModelEntropy,
    ConformalSetSize { alpha: f64 },
    PoolFailure,
    FirstLayer,
    FirstCheckpoint,
    CheckpointFailure,
    ProbabilityMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorFamily {
    Human,
    ReferenceFree,
    ReferenceDependent,
}

impl IndicatorId {
    pub fn family(self) -> IndicatorFamily {
        use IndicatorId::*;
        match self {
            HumanDissensus | HumanEntropy => IndicatorFamily::Human,
            PoolDissensus | PoolEntropy | AvgModelEntropy | ConformalSetSize { .. } => {
                IndicatorFamily::ReferenceFree
            }
            PoolFailure | FirstLayer | FirstCheckpoint | CheckpointFailure | ProbabilityMass => {
                IndicatorFamily::ReferenceDependent
            }
        }
    }

    /// Column order used in every table: human, reference-free, reference-dependent.
    pub fn all(alphas: &[f64]) -> Vec<IndicatorId> {
        use IndicatorId::*;
        let mut ids = vec![HumanDissensus, HumanEntropy, PoolDissensus, PoolEntropy, AvgModelEntropy];
        ids.extend(alphas.iter().map(|&alpha| ConformalSetSize { alpha }));
        ids.extend([PoolFailure, FirstLayer, FirstCheckpoint, CheckpointFailure, ProbabilityMass]);
        ids
    }
}

impl fmt::Display for IndicatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use IndicatorId::*;
        match self {
            HumanDissensus => f.write_str("H_dis"),
            HumanEntropy => f.write_str("H_ent"),
            PoolDissensus => f.write_str("M_dis"),
            PoolEntropy => f.write_str("M_ent"),
            AvgModelEntropy => f.write_str("M_avg_ent"),
            ConformalSetSize { alpha } => write!(f, "M_CP_{alpha}"),
            PoolFailure => f.write_str("M_fail"),
            FirstLayer => f.write_str("M_1st_layer"),
            FirstCheckpoint => f.write_str("M_1st_ckpt"),
            CheckpointFailure => f.write_str("M_avg_ckpt"),
            ProbabilityMass => f.write_str("M_avg_ckpt_p"),
        }
    }
}

impl FromStr for IndicatorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use IndicatorId::*;
        Ok(match s {
            "H_dis" => HumanDissensus,
            "H_ent" => HumanEntropy,
            "M_dis" => PoolDissensus,
            "M_ent" => PoolEntropy,
            "M_avg_ent" => AvgModelEntropy,
            "M_fail" => PoolFailure,
            "M_1st_layer" => FirstLayer,
            "M_1st_ckpt" => FirstCheckpoint,
            "M_avg_ckpt" => CheckpointFailure,
            "M_avg_ckpt_p" => ProbabilityMass,
            other => {
                let alpha = other
                    .strip_prefix("M_CP_")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| format!("unknown indicator {other:?}"))?;
                ConformalSetSize { alpha }
            }
        })
    }
}

/// Computes one indicator. `majority` comes from [`majority_labels`].
pub fn compute_indicator(
    id: IndicatorId,
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    exec: Execution,
) -> Result<IndicatorVector, ConformalError> {
    use IndicatorId::*;
    Ok(match id {
        HumanDissensus => dissensus_indicator(bundle),
        HumanEntropy => entropy_indicator(bundle),
        PoolDissensus => pool_dissensus_indicator(bundle, exec),
        PoolEntropy => pool_entropy_indicator(bundle, exec),
        AvgModelEntropy => avg_model_entropy_indicator(bundle, exec),
        ConformalSetSize { alpha } => cp_set_size_indicator(bundle, majority, alpha, exec)?,
        PoolFailure => failure_rate_indicator(bundle, majority, exec),
        FirstLayer => first_layer_indicator(bundle, majority, exec),
        FirstCheckpoint => first_checkpoint_indicator(bundle, majority, exec),
        CheckpointFailure => checkpoint_failure_rate(bundle, majority, exec),
        ProbabilityMass => avg_probability_mass_indicator(bundle, majority, exec),
    })
}

/// Every indicator for every item, in [`IndicatorId::all`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTable {
    pub ids: Vec<IndicatorId>,
    pub columns: Vec<IndicatorVector>,
    pub majority: Vec<Option<usize>>,
}

impl IndicatorTable {
    pub fn compute(
        bundle: &PredictionBundle,
        alphas: &[f64],
        exec: Execution,
    ) -> Result<Self, ConformalError> {
        let majority = majority_labels(bundle);
        let ids = IndicatorId::all(alphas);
        let columns = ids
            .iter()
            .map(|&id| compute_indicator(id, bundle, &majority, exec))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ids, columns, majority })
    }

    pub fn column(&self, id: IndicatorId) -> Option<&IndicatorVector> {
        self.ids.iter().position(|&i| i == id).map(|pos| &self.columns[pos])
    }

    pub fn by_family(&self, family: IndicatorFamily) -> Vec<&IndicatorVector> {
        self.ids
            .iter()
            .zip(&self.columns)
            .filter(|(id, _)| id.family() == family)
            .map(|(_, c)| c)
            .collect()
    }
}
