//! Least-ambiguous set-valued classifier (LAC) conformal prediction with
//! leave-one-out calibration.
//!
//! For a model θ and calibration scores `s = p(y' | x', θ)` over `n` items,
//! the quantile level is `q̂ = (n + 1)(1 - α) / n` and the threshold is the
//! largest `t` with `#{s >= t} / n >= q̂`, i.e. the `⌈q̂ n⌉`-th largest
//! score. When `q̂ > 1` no finite threshold qualifies and the prediction set
//! is the full label set. Sets are `{y : p(y | x, θ) >= t}` and may be empty.
//!
//! Each test item is calibrated on every other item that has a unique
//! majority label; items without one get no set.

use std::cmp::Ordering;

use thiserror::Error;

use crate::bundle::PredictionBundle;
use crate::exec::Execution;
use crate::types::{IndicatorVector, ProbVector};

/// Risk tolerances used unless the caller asks otherwise.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.05, 0.1, 0.2];

/// Slack when comparing `#{s >= t}` against `q̂ n`, which is computed in
/// floating point (e.g. `10 * 0.9` must count as exactly 9).
const COUNT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("calibration score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpConfig {
    alpha: f64,
}

impl CpConfig {
    pub fn new(alpha: f64) -> Result<Self, ConformalError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(ConformalError::InvalidAlpha(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn defaults() -> Vec<CpConfig> {
        DEFAULT_ALPHAS.iter().map(|&a| CpConfig { alpha: a }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    /// `q̂ > 1`: every class is included.
    FullSet,
}

impl Threshold {
    pub fn admits(self, prob: f64) -> bool {
        match self {
            Threshold::Finite(t) => prob >= t,
            Threshold::FullSet => true,
        }
    }
}

pub fn quantile_level(n: usize, alpha: f64) -> f64 {
    (n as f64 + 1.0) / n as f64 * (1.0 - alpha)
}

/// `⌈q̂ n⌉`, or `None` when `q̂ > 1`.
pub fn required_count(n: usize, alpha: f64) -> Option<usize> {
    let need = (n as f64 + 1.0) * (1.0 - alpha);
    let count = ((need - COUNT_SLACK).ceil().max(1.0)) as usize;
    (count <= n).then_some(count)
}

fn descending(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

pub fn calibrate_threshold(scores: &[f64], alpha: f64) -> Result<Threshold, ConformalError> {
    let config = CpConfig::new(alpha)?;
    if scores.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(ConformalError::ScoreOutOfRange(bad));
    }
    let Some(count) = required_count(scores.len(), config.alpha) else {
        return Ok(Threshold::FullSet);
    };
    let mut sorted = scores.to_vec();
    sorted.sort_by(descending);
    Ok(Threshold::Finite(sorted[count - 1]))
}

pub fn prediction_set<P: ProbVector + ?Sized>(probs: &P, threshold: Threshold) -> Vec<usize> {
    (0..probs.class_count())
        .filter(|&c| threshold.admits(probs.prob(c)))
        .collect()
}

/// Leave-one-out thresholds, indexed `[model][item]`; `None` for items
/// without a reference label.
#[derive(Debug, Clone, PartialEq)]
pub struct LooThresholds {
    pub alpha: f64,
    pub per_model: Vec<Vec<Option<Threshold>>>,
}

/// Calibrates one threshold per (model, item), each on all other labelled
/// items' reference-label scores under that model.
///
/// Scores are sorted once per model; dropping the held-out item shifts the
/// cut by one position when that item sits above it. The result equals a
/// per-item recomputation exactly, since thresholds are always copied
/// from the score array.
pub fn leave_one_out_thresholds(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    alpha: f64,
    exec: Execution,
) -> Result<LooThresholds, ConformalError> {
    let config = CpConfig::new(alpha)?;
    assert_eq!(majority.len(), bundle.item_count());
    let eligible: Vec<usize> = (0..bundle.item_count())
        .filter(|&i| majority[i].is_some())
        .collect();
    if eligible.len() < 2 {
        return Err(ConformalError::EmptyCalibration);
    }
    let count = required_count(eligible.len() - 1, config.alpha);

    let per_model = exec.map(bundle.model_count(), |model| {
        let scores: Vec<f64> = eligible
            .iter()
            .map(|&i| {
                let y = majority[i].expect("eligible items are labelled");
                f64::from(bundle.final_probs(model, i)[y])
            })
            .collect();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| descending(&scores[a], &scores[b]).then(a.cmp(&b)));
        let mut rank = vec![0usize; scores.len()];
        for (pos, &idx) in order.iter().enumerate() {
            rank[idx] = pos;
        }

        let mut out = vec![None; bundle.item_count()];
        for (slot, &item) in eligible.iter().enumerate() {
            out[item] = Some(match count {
                None => Threshold::FullSet,
                Some(c) => {
                    let pos = if rank[slot] < c { c } else { c - 1 };
                    Threshold::Finite(scores[order[pos]])
                }
            });
        }
        out
    });
    Ok(LooThresholds { alpha, per_model })
}

/// Mean prediction-set size over the pool, per item.
pub fn cp_set_size_indicator(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    alpha: f64,
    exec: Execution,
) -> Result<IndicatorVector, ConformalError> {
    let loo = leave_one_out_thresholds(bundle, majority, alpha, exec)?;
    let m = bundle.model_count();
    let values = exec.map(bundle.item_count(), |item| {
        majority[item]?;
        let mut total = 0usize;
        for model in 0..m {
            let t = loo.per_model[model][item].expect("labelled item has a threshold");
            total += prediction_set(bundle.final_probs(model, item), t).len();
        }
        Some(total as f64 / m as f64)
    });
    Ok(IndicatorVector::new(cp_indicator_id(alpha), values)
        .with_param("alpha", alpha)
        .with_pool(bundle.pool_id()))
}

pub fn cp_indicator_id(alpha: f64) -> String {
    format!("M_CP_{alpha}")
}

/// Fraction of labelled (item, model) pairs whose set contains the reference label.
pub fn empirical_coverage(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    alpha: f64,
    exec: Execution,
) -> Result<f64, ConformalError> {
    let loo = leave_one_out_thresholds(bundle, majority, alpha, exec)?;
    let mut covered = 0usize;
    let mut total = 0usize;
    for (item, y) in majority.iter().enumerate() {
        let Some(y) = *y else { continue };
        for model in 0..bundle.model_count() {
            let t = loo.per_model[model][item].expect("labelled item has a threshold");
            total += 1;
            if t.admits(f64::from(bundle.final_probs(model, item)[y])) {
                covered += 1;
            }
        }
    }
    Ok(covered as f64 / total as f64)
}
