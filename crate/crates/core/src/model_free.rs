//! Reference-free indicators from the pool's final predictions.

use crate::bundle::PredictionBundle;
use crate::exec::Execution;
use crate::human::human_dissensus;
use crate::types::{
    canonical_argmax, order_free_mean, shannon_entropy, IndicatorVector, LabelDistribution, ProbVector,
};

/// Share of models whose argmax is each class.
pub fn pool_vote_distribution<P: ProbVector>(preds: &[P], k: usize) -> LabelDistribution {
    assert!(!preds.is_empty(), "a pool needs at least one model");
    let mut counts = vec![0usize; k];
    for pred in preds {
        counts[canonical_argmax(pred)] += 1;
    }
    let m = preds.len() as f64;
    LabelDistribution::new(counts.into_iter().map(|c| c as f64 / m).collect())
        .expect("vote shares form a distribution")
}

pub fn pool_dissensus<P: ProbVector>(preds: &[P], k: usize) -> f64 {
    human_dissensus(&pool_vote_distribution(preds, k))
}

pub fn pool_entropy<P: ProbVector>(preds: &[P], k: usize) -> f64 {
    shannon_entropy(&pool_vote_distribution(preds, k))
}

/// Mean over models of each model's own predictive entropy.
pub fn avg_model_entropy<P: ProbVector>(preds: &[P]) -> f64 {
    assert!(!preds.is_empty(), "a pool needs at least one model");
    order_free_mean(preds.iter().map(|p| shannon_entropy(p)).collect())
}

/// Final-checkpoint predictions of every model for `item`, in model order.
pub fn final_predictions(bundle: &PredictionBundle, item: usize) -> Vec<&[f32]> {
    (0..bundle.model_count())
        .map(|m| bundle.final_probs(m, item))
        .collect()
}

fn per_item(
    bundle: &PredictionBundle,
    id: &str,
    exec: Execution,
    f: impl Fn(&[&[f32]]) -> f64 + Sync + Send,
) -> IndicatorVector {
    let values = exec.map(bundle.item_count(), |i| Some(f(&final_predictions(bundle, i))));
    IndicatorVector::new(id, values).with_pool(bundle.pool_id())
}

pub fn pool_dissensus_indicator(bundle: &PredictionBundle, exec: Execution) -> IndicatorVector {
    let k = bundle.k();
    per_item(bundle, "M_dis", exec, |p| pool_dissensus(p, k))
}

pub fn pool_entropy_indicator(bundle: &PredictionBundle, exec: Execution) -> IndicatorVector {
    let k = bundle.k();
    per_item(bundle, "M_ent", exec, |p| pool_entropy(p, k))
}

pub fn avg_model_entropy_indicator(bundle: &PredictionBundle, exec: Execution) -> IndicatorVector {
    per_item(bundle, "M_avg_ent", exec, |p| avg_model_entropy(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onehot(k: usize, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[c] = 1.0;
        v
    }

    #[test]
    fn vote_distribution_examples() {
        // argmaxes A, A, B, C, A
        let preds: Vec<Vec<f64>> = [0, 0, 1, 2, 0]
            .iter()
            .map(|&c| {
                let mut v = vec![0.2, 0.2, 0.2];
                v[c] = 0.6;
                v
            })
            .collect();
        let d = pool_vote_distribution(&preds, 3);
        for (got, want) in d.probs().iter().zip([0.6, 0.2, 0.2]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((pool_dissensus(&preds, 3) - 0.4).abs() < 1e-9);
        assert!((pool_entropy(&preds, 3) - 0.9502705392332347).abs() < 1e-9);

        let all_two = vec![onehot(3, 2); 4];
        assert_eq!(pool_vote_distribution(&all_two, 3).probs(), &[0.0, 0.0, 1.0]);
        assert_eq!(pool_dissensus(&all_two, 3), 0.0);
        assert_eq!(pool_entropy(&all_two, 3), 0.0);

        let single = vec![vec![0.1, 0.7, 0.2]];
        assert_eq!(pool_vote_distribution(&single, 3).probs(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn even_split_is_maximal() {
        let preds: Vec<Vec<f64>> = (0..6).map(|j| onehot(3, j % 3)).collect();
        assert!((pool_dissensus(&preds, 3) - 2.0 / 3.0).abs() < 1e-12);
        assert!((pool_entropy(&preds, 3) - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn avg_entropy_examples() {
        let third = 1.0 / 3.0;
        let preds = vec![vec![1.0, 0.0, 0.0], vec![third, third, third]];
        assert!((avg_model_entropy(&preds) - 0.5493061443340549).abs() < 1e-9);
        let det = vec![onehot(3, 0), onehot(3, 1)];
        assert_eq!(avg_model_entropy(&det), 0.0);
        let uni = vec![vec![0.25; 4]; 3];
        assert!((avg_model_entropy(&uni) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn argmax_only_vs_full_distribution() {
        let sharp = vec![vec![0.9, 0.05, 0.05], vec![0.1, 0.8, 0.1], vec![0.9, 0.05, 0.05]];
        let soft = vec![vec![0.4, 0.3, 0.3], vec![0.3, 0.4, 0.3], vec![0.5, 0.25, 0.25]];
        assert_eq!(pool_dissensus(&sharp, 3), pool_dissensus(&soft, 3));
        assert_eq!(pool_entropy(&sharp, 3), pool_entropy(&soft, 3));
        assert_ne!(avg_model_entropy(&sharp), avg_model_entropy(&soft));
    }

    #[test]
    fn model_order_does_not_matter() {
        let preds = vec![vec![0.9, 0.05, 0.05], vec![0.1, 0.8, 0.1], vec![0.2, 0.2, 0.6]];
        let mut rev = preds.clone();
        rev.reverse();
        assert_eq!(pool_dissensus(&preds, 3), pool_dissensus(&rev, 3));
        assert_eq!(pool_entropy(&preds, 3), pool_entropy(&rev, 3));
        assert!((avg_model_entropy(&preds) - avg_model_entropy(&rev)).abs() < 1e-15);
    }
}
