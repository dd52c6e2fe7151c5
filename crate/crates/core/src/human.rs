//! Human-based indicators computed from annotator vote counts.

use thiserror::Error;

use crate::bundle::PredictionBundle;
use crate::types::{shannon_entropy, AnnotationRecord, IndicatorVector, LabelDistribution, ProbVector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("item {item_id} has no unique majority label")]
pub struct TiedPlurality {
    pub item_id: String,
}

/// `Pr_H(y | x) = votes_y / n`.
pub fn human_distribution(record: &AnnotationRecord, k: usize) -> LabelDistribution {
    assert_eq!(record.votes.len(), k, "vote vector length must equal k");
    let n = f64::from(record.n());
    LabelDistribution::new(record.votes.iter().map(|&v| f64::from(v) / n).collect())
        .expect("vote ratios form a distribution")
}

/// `1 - max_y Pr(y | x)`.
pub fn human_dissensus<P: ProbVector + ?Sized>(dist: &P) -> f64 {
    let mut max = 0.0f64;
    for class in 0..dist.class_count() {
        max = max.max(dist.prob(class));
    }
    1.0 - max
}

pub fn human_entropy<P: ProbVector + ?Sized>(dist: &P) -> f64 {
    shannon_entropy(dist)
}

/// The class with strictly more votes than every other class.
pub fn majority_label(record: &AnnotationRecord) -> Result<usize, TiedPlurality> {
    let top = record.votes.iter().copied().max().unwrap_or(0);
    let mut winners = record.votes.iter().enumerate().filter(|(_, &v)| v == top);
    match (winners.next(), winners.next()) {
        (Some((class, _)), None) => Ok(class),
        _ => Err(TiedPlurality {
            item_id: record.item_id.clone(),
        }),
    }
}

/// Reference label per item; `None` for tied pluralities.
pub fn majority_labels(bundle: &PredictionBundle) -> Vec<Option<usize>> {
    bundle.items().iter().map(|r| majority_label(r).ok()).collect()
}

/// Ids of items without a unique majority label.
pub fn tied_items(bundle: &PredictionBundle) -> Vec<String> {
    bundle
        .items()
        .iter()
        .filter(|r| majority_label(r).is_err())
        .map(|r| r.item_id.clone())
        .collect()
}

/// Dissensus from counts: `(n - max votes) / n`.
fn dissensus_from_counts(record: &AnnotationRecord) -> f64 {
    let n = record.n();
    let top = record.votes.iter().copied().max().unwrap_or(0);
    f64::from(n - top) / f64::from(n)
}

fn entropy_from_counts(record: &AnnotationRecord) -> f64 {
    let n = f64::from(record.n());
    let ratios: Vec<f64> = record.votes.iter().map(|&v| f64::from(v) / n).collect();
    shannon_entropy(&ratios[..])
}

pub fn dissensus_indicator(bundle: &PredictionBundle) -> IndicatorVector {
    let values = bundle.items().iter().map(|r| Some(dissensus_from_counts(r))).collect();
    IndicatorVector::new("H_dis", values).with_pool(bundle.pool_id())
}

pub fn entropy_indicator(bundle: &PredictionBundle) -> IndicatorVector {
    let values = bundle.items().iter().map(|r| Some(entropy_from_counts(r))).collect();
    IndicatorVector::new("H_ent", values).with_pool(bundle.pool_id())
}
