//! Reference-dependent indicators, scored against the human majority label.
//!
//! "Correct" always means the canonical argmax equals the reference label.

use crate::bundle::PredictionBundle;
use crate::exec::Execution;
use crate::types::{canonical_argmax, order_free_mean, IndicatorVector, ProbVector};

/// Share of models whose argmax misses `y_star`.
pub fn pool_failure_rate<P: ProbVector>(final_preds: &[P], y_star: usize) -> f64 {
    let misses = final_preds
        .iter()
        .filter(|p| canonical_argmax(*p) != y_star)
        .count();
    misses as f64 / final_preds.len() as f64
}

/// Normalized start of the correct suffix of a prediction sequence.
///
/// Returns 1 when the last prediction is wrong, otherwise `j / (len + 1)`
/// where `j` (1-based) is the earliest index from which every prediction
/// is correct.
fn suffix_start_score<P: ProbVector>(preds: &[P], y_star: usize) -> f64 {
    assert!(!preds.is_empty(), "need at least one prediction");
    let len = preds.len();
    let mut start = len;
    while start > 0 && canonical_argmax(&preds[start - 1]) == y_star {
        start -= 1;
    }
    if start == len {
        return 1.0;
    }
    (start + 1) as f64 / (len + 1) as f64
}

/// Prediction-depth score of one model from its per-layer logit-lens outputs.
pub fn first_correct_layer_score<P: ProbVector>(layer_preds: &[P], y_star: usize) -> f64 {
    suffix_start_score(layer_preds, y_star)
}

/// Training-dynamics score of one model from its per-checkpoint outputs.
pub fn first_correct_checkpoint_score<P: ProbVector>(ckpt_preds: &[P], y_star: usize) -> f64 {
    suffix_start_score(ckpt_preds, y_star)
}

fn labelled(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    id: &str,
    exec: Execution,
    f: impl Fn(usize, usize) -> f64 + Sync + Send,
) -> IndicatorVector {
    assert_eq!(majority.len(), bundle.item_count());
    let values = exec.map(bundle.item_count(), |item| majority[item].map(|y| f(item, y)));
    IndicatorVector::new(id, values).with_pool(bundle.pool_id())
}

/// Mean over models of a per-model score.
fn model_mean(bundle: &PredictionBundle, score: impl Fn(usize) -> f64) -> f64 {
    order_free_mean((0..bundle.model_count()).map(score).collect())
}

pub fn failure_rate_indicator(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    exec: Execution,
) -> IndicatorVector {
    labelled(bundle, majority, "M_fail", exec, |item, y| {
        let preds: Vec<&[f32]> = (0..bundle.model_count())
            .map(|m| bundle.final_probs(m, item))
            .collect();
        pool_failure_rate(&preds, y)
    })
}

pub fn first_layer_indicator(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    exec: Execution,
) -> IndicatorVector {
    labelled(bundle, majority, "M_1st_layer", exec, |item, y| {
        model_mean(bundle, |m| {
            let layers: Vec<&[f32]> = (0..bundle.meta(m).layer_count)
                .map(|l| bundle.layer_probs(m, l, item))
                .collect();
            first_correct_layer_score(&layers, y)
        })
    })
}

pub fn first_checkpoint_indicator(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    exec: Execution,
) -> IndicatorVector {
    labelled(bundle, majority, "M_1st_ckpt", exec, |item, y| {
        model_mean(bundle, |m| {
            let ckpts: Vec<&[f32]> = (0..bundle.meta(m).checkpoint_count)
                .map(|c| bundle.checkpoint_probs(m, c, item))
                .collect();
            first_correct_checkpoint_score(&ckpts, y)
        })
    })
}

/// Mean over models of each model's share of failing checkpoints.
pub fn checkpoint_failure_rate(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    exec: Execution,
) -> IndicatorVector {
    labelled(bundle, majority, "M_avg_ckpt", exec, |item, y| {
        model_mean(bundle, |m| {
            let p = bundle.meta(m).checkpoint_count;
            let misses = (0..p)
                .filter(|&c| canonical_argmax(bundle.checkpoint_probs(m, c, item)) != y)
                .count();
            misses as f64 / p as f64
        })
    })
}

/// One minus the mean reference-label probability over models and checkpoints.
pub fn avg_probability_mass_indicator(
    bundle: &PredictionBundle,
    majority: &[Option<usize>],
    exec: Execution,
) -> IndicatorVector {
    labelled(bundle, majority, "M_avg_ckpt_p", exec, |item, y| {
        let mass = model_mean(bundle, |m| {
            let p = bundle.meta(m).checkpoint_count;
            order_free_mean(
                (0..p)
                    .map(|c| f64::from(bundle.checkpoint_probs(m, c, item)[y]))
                    .collect(),
            )
        });
        1.0 - mass
    })
}
