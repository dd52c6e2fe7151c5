//! Deliberately naive reimplementations of every indicator, used only to
//! cross-check the main code paths in tests. Nothing here shares code with
//! the production modules apart from bundle accessors.

use crate::bundle::PredictionBundle;
use crate::indicators::IndicatorId;

fn row(bundle: &PredictionBundle, data: &[f32], depth: usize, item: usize) -> Vec<f64> {
    let (n, k) = (bundle.item_count(), bundle.k());
    let start = (depth * n + item) * k;
    data[start..start + k].iter().map(|&v| f64::from(v)).collect()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for c in 1..p.len() {
        if p[c] > p[best] {
            best = c;
        }
    }
    best
}

fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h.max(0.0)
}

fn majority(votes: &[u32]) -> Option<usize> {
    let top = *votes.iter().max()?;
    let winners: Vec<usize> = (0..votes.len()).filter(|&c| votes[c] == top).collect();
    (winners.len() == 1).then(|| winners[0])
}

fn finals(bundle: &PredictionBundle, item: usize) -> Vec<Vec<f64>> {
    bundle
        .models()
        .iter()
        .map(|m| row(bundle, &m.layers, m.meta.layer_count - 1, item))
        .collect()
}

fn vote_share(bundle: &PredictionBundle, item: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bundle.k()];
    let preds = finals(bundle, item);
    for p in &preds {
        counts[argmax(p)] += 1.0;
    }
    counts.iter().map(|c| c / preds.len() as f64).collect()
}

fn suffix_score(labels: &[usize], y: usize) -> f64 {
    let len = labels.len();
    if labels[len - 1] != y {
        return 1.0;
    }
    for j in 0..len {
        if labels[j..].iter().all(|&l| l == y) {
            return (j + 1) as f64 / (len + 1) as f64;
        }
    }
    unreachable!()
}

/// Threshold by scanning every candidate value; `None` means the full set.
fn scan_threshold(scores: &[f64], alpha: f64) -> Option<f64> {
    let n = scores.len() as f64;
    let q = (n + 1.0) * (1.0 - alpha) / n;
    if q > 1.0 + 1e-12 {
        return None;
    }
    let mut candidates = scores.to_vec();
    candidates.push(0.0);
    let mut best = f64::NEG_INFINITY;
    for &t in &candidates {
        let covered = scores.iter().filter(|&&s| s >= t).count() as f64;
        if covered >= q * n - 1e-9 && t > best {
            best = t;
        }
    }
    Some(best)
}

fn cp_sizes(bundle: &PredictionBundle, alpha: f64) -> Vec<Option<f64>> {
    let n = bundle.item_count();
    let labels: Vec<Option<usize>> = bundle.items().iter().map(|r| majority(&r.votes)).collect();
    (0..n)
        .map(|i| {
            labels[i]?;
            let mut total = 0.0;
            for m in bundle.models() {
                let depth = m.meta.layer_count - 1;
                let scores: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| labels[j].map(|y| row(bundle, &m.layers, depth, j)[y]))
                    .collect();
                let p = row(bundle, &m.layers, depth, i);
                total += match scan_threshold(&scores, alpha) {
                    None => p.len() as f64,
                    Some(t) => p.iter().filter(|&&x| x >= t).count() as f64,
                };
            }
            Some(total / bundle.model_count() as f64)
        })
        .collect()
}

/// Values of `id` for every item, computed from scratch.
pub fn indicator(bundle: &PredictionBundle, id: IndicatorId) -> Vec<Option<f64>> {
    use IndicatorId::*;
    let n = bundle.item_count();
    let m = bundle.model_count() as f64;
    if let ConformalSetSize { alpha } = id {
        return cp_sizes(bundle, alpha);
    }
    (0..n)
        .map(|i| {
            let votes = &bundle.items()[i].votes;
            let total: u32 = votes.iter().sum();
            let human: Vec<f64> = votes.iter().map(|&v| f64::from(v) / f64::from(total)).collect();
            let y = majority(votes);
            let preds = finals(bundle, i);
            Some(match id {
                HumanDissensus => 1.0 - human.iter().cloned().fold(0.0, f64::max),
                HumanEntropy => entropy(&human),
                PoolDissensus => 1.0 - vote_share(bundle, i).into_iter().fold(0.0, f64::max),
                PoolEntropy => entropy(&vote_share(bundle, i)),
                AvgModelEntropy => preds.iter().map(|p| entropy(p)).sum::<f64>() / m,
                PoolFailure => {
                    let y = y?;
                    preds.iter().filter(|p| argmax(p) != y).count() as f64 / m
                }
                FirstLayer | FirstCheckpoint => {
                    let y = y?;
                    let mut sum = 0.0;
                    for model in bundle.models() {
                        let (data, depth) = if id == FirstLayer {
                            (&model.layers, model.meta.layer_count)
                        } else {
                            (&model.checkpoints, model.meta.checkpoint_count)
                        };
                        let labels: Vec<usize> =
                            (0..depth).map(|d| argmax(&row(bundle, data, d, i))).collect();
                        sum += suffix_score(&labels, y);
                    }
                    sum / m
                }
                CheckpointFailure | ProbabilityMass => {
                    let y = y?;
                    let mut sum = 0.0;
                    for model in bundle.models() {
                        let p = model.meta.checkpoint_count;
                        let mut acc = 0.0;
                        for c in 0..p {
                            let probs = row(bundle, &model.checkpoints, c, i);
                            acc += if id == CheckpointFailure {
                                if argmax(&probs) != y { 1.0 } else { 0.0 }
                            } else {
                                probs[y]
                            };
                        }
                        sum += acc / p as f64;
                    }
                    if id == CheckpointFailure { sum / m } else { 1.0 - sum / m }
                }
                ConformalSetSize { .. } => unreachable!(),
            })
        })
        .collect()
}
