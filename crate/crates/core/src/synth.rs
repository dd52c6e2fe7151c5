//! Seeded synthetic pools for tests and benchmarks.
//!
//! Every item draws from a planted label distribution whose spread is set by
//! `ambiguity`; annotator votes are sampled from it. Each model's predictions
//! for the item are then generated with a latent item difficulty whose link
//! to the human spread depends on the [`Coupling`] mode.
//!
//! Randomness comes from ChaCha8 keyed by the seed, with one stream per
//! (item, slot): slot 0 holds item-level draws (planted label, votes,
//! difficulty) and slot `1 + j` holds model `j`'s draws. Adding models or
//! items therefore never changes the draws of existing ones. Generation only
//! uses additions, multiplications and divisions on `f64` before the final
//! cast to `f32`, so bundles are identical across platforms.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bundle::{ModelTensors, PredictionBundle};
use crate::human::majority_label;
use crate::types::{AnnotationRecord, LabelMode, ModelMeta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic pool config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Models fail and hesitate where annotators disagree.
    Aligned,
    /// Failures follow annotator disagreement; confidence is unrelated.
    ArgmaxAligned,
    /// Models fail and hesitate where annotators agree.
    AntiAligned,
    /// Models hesitate most at intermediate pool failure rates and are
    /// confident both when they all succeed and when they all fail.
    InvertedU,
    /// Model behaviour is independent of the annotators.
    Independent,
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coupling::Aligned => "aligned",
            Coupling::ArgmaxAligned => "argmax_aligned",
            Coupling::AntiAligned => "anti_aligned",
            Coupling::InvertedU => "inverted_u",
            Coupling::Independent => "independent",
        })
    }
}

impl FromStr for Coupling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "aligned" => Coupling::Aligned,
            "argmax_aligned" => Coupling::ArgmaxAligned,
            "anti_aligned" => Coupling::AntiAligned,
            "inverted_u" => Coupling::InvertedU,
            "independent" | "none" => Coupling::Independent,
            other => return Err(format!("unknown coupling {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub items: usize,
    pub models: usize,
    pub k: usize,
    /// Checkpoints per model; a single entry applies to every model.
    pub checkpoints: Vec<usize>,
    /// Layers per model; a single entry applies to every model.
    pub layers: Vec<usize>,
    pub annotators: u32,
    /// Spread of the planted human distribution, in `[0, 1]`.
    pub ambiguity: f64,
    pub coupling: Coupling,
    pub seed: u64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            items: 100,
            models: 5,
            k: 3,
            checkpoints: vec![3],
            layers: vec![4],
            annotators: 10,
            ambiguity: 0.6,
            coupling: Coupling::Aligned,
            seed: 0,
        }
    }
}

impl PoolConfig {
    fn per_model(values: &[usize], model: usize) -> usize {
        if values.len() == 1 {
            values[0]
        } else {
            values[model]
        }
    }

    pub fn checkpoint_count(&self, model: usize) -> usize {
        Self::per_model(&self.checkpoints, model)
    }

    pub fn layer_count(&self, model: usize) -> usize {
        Self::per_model(&self.layers, model)
    }

    fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.items == 0 || self.models == 0 {
            return fail("need at least one item and one model".into());
        }
        if self.k < 2 {
            return fail(format!("need at least 2 classes, got {}", self.k));
        }
        if self.annotators == 0 {
            return fail("need at least one annotator".into());
        }
        if !(0.0..=1.0).contains(&self.ambiguity) {
            return fail(format!("ambiguity {} outside [0, 1]", self.ambiguity));
        }
        for (name, values) in [("checkpoints", &self.checkpoints), ("layers", &self.layers)] {
            if values.len() != 1 && values.len() != self.models {
                return fail(format!("{name} needs 1 or {} entries", self.models));
            }
            if values.contains(&0) {
                return fail(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, item: usize, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((item as u64) << 20) | slot);
    rng
}

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Share of the leftover mass the largest other class can receive.
fn max_other_share(k: usize) -> f64 {
    if k == 2 {
        1.0
    } else {
        1.5 / (1.5 + (k - 2) as f64)
    }
}

/// Smallest confidence that keeps `label` the strict argmax.
fn min_confidence(k: usize) -> f64 {
    let s = max_other_share(k);
    s / (1.0 + s) + 0.02
}

/// Probabilities with mass `conf` on `label` and the rest spread with jitter.
fn spread(rng: &mut ChaCha8Rng, k: usize, label: usize, conf: f64) -> Vec<f64> {
    let conf = conf.clamp(min_confidence(k), 0.995);
    let weights: Vec<f64> = (0..k)
        .map(|c| if c == label { 0.0 } else { 1.0 + 0.5 * rng.random::<f64>() })
        .collect();
    let total: f64 = weights.iter().sum();
    (0..k)
        .map(|c| if c == label { conf } else { (1.0 - conf) * weights[c] / total })
        .collect()
}

/// Item-level draws, all taken in a fixed order from slot 0.
struct ItemPlan {
    votes: Vec<u32>,
    reference: usize,
    alternative: usize,
    spread: f64,
    difficulty: f64,
}

fn plan_item(config: &PoolConfig, item: usize) -> ItemPlan {
    let k = config.k;
    let mut rng = stream(config.seed, item, 0);
    let planted_label = rng.random_range(0..k);
    let spread_draw: f64 = rng.random();
    let noise: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    let independent_draw: f64 = rng.random();

    let h = config.ambiguity * spread_draw;
    let noise_total: f64 = noise.iter().sum::<f64>().max(1e-12);
    let planted: Vec<f64> = (0..k)
        .map(|c| {
            let base = if c == planted_label { 1.0 - h } else { 0.0 };
            base + h * noise[c] / noise_total
        })
        .collect();
    let mut votes = vec![0u32; k];
    for _ in 0..config.annotators {
        votes[categorical(&mut rng, &planted)] += 1;
    }
    let record = AnnotationRecord::new("", votes.clone());
    let reference = majority_label(&record).unwrap_or(planted_label);
    let alternative = (0..k)
        .filter(|&c| c != reference)
        .max_by(|&a, &b| planted[a].total_cmp(&planted[b]).then(b.cmp(&a)))
        .expect("k >= 2");

    let difficulty = match config.coupling {
        // Half planted, half idiosyncratic to the models.
        Coupling::Aligned | Coupling::ArgmaxAligned => 0.5 * (spread_draw + independent_draw),
        Coupling::AntiAligned => 0.5 * (1.0 - spread_draw + independent_draw),
        // Skewed toward easy items, as in real evaluation sets.
        Coupling::InvertedU => independent_draw * independent_draw,
        Coupling::Independent => independent_draw,
    };
    ItemPlan {
        votes,
        reference,
        alternative,
        spread: spread_draw,
        difficulty,
    }
}

/// Final confidence of one model on one item.
fn confidence(config: &PoolConfig, plan: &ItemPlan, fail_share: f64, rng: &mut ChaCha8Rng) -> f64 {
    let lo = min_confidence(config.k);
    let hi = 0.97;
    let jitter = 0.06 * (rng.random::<f64>() - 0.5);
    let hesitation = match config.coupling {
        Coupling::Aligned => plan.spread,
        Coupling::AntiAligned => 1.0 - plan.spread,
        Coupling::ArgmaxAligned | Coupling::Independent => rng.random::<f64>(),
        // Peaks when half the pool fails.
        Coupling::InvertedU => 1.0 - (2.0 * fail_share - 1.0).abs(),
    };
    hi - (hi - lo) * hesitation + jitter
}

/// Position (1-based) where predictions switch to their final label.
fn onset(difficulty: f64, len: usize, rng: &mut ChaCha8Rng) -> usize {
    let noisy = (difficulty + 0.3 * (rng.random::<f64>() - 0.5)).clamp(0.0, 0.999);
    1 + (noisy * len as f64) as usize
}

struct ModelItem {
    checkpoints: Vec<Vec<f64>>,
    layers: Vec<Vec<f64>>,
}

fn model_item(
    config: &PoolConfig,
    plan: &ItemPlan,
    model: usize,
    fails: bool,
    fail_share: f64,
    rng: &mut ChaCha8Rng,
) -> ModelItem {
    let k = config.k;
    let p = config.checkpoint_count(model);
    let l = config.layer_count(model);
    let final_label = if fails { plan.alternative } else { plan.reference };
    let early_label = if fails { plan.reference } else { plan.alternative };
    let conf = confidence(config, plan, fail_share, rng);
    let final_probs = spread(rng, k, final_label, conf);

    // Correct models settle later on hard items; failing models drift away earlier.
    let lateness = if fails { 1.0 - plan.difficulty } else { plan.difficulty };
    let ckpt_onset = onset(lateness, p, rng);
    let mut checkpoints = Vec::with_capacity(p);
    for j in 1..p {
        let progress = j as f64 / p as f64;
        let label = if j >= ckpt_onset { final_label } else { early_label };
        checkpoints.push(spread(rng, k, label, 0.4 + (conf - 0.4) * progress));
    }
    checkpoints.push(final_probs.clone());

    let layer_onset = onset(lateness, l, rng);
    let mut layers = Vec::with_capacity(l);
    for j in 1..l {
        let progress = j as f64 / l as f64;
        let label = if j >= layer_onset { final_label } else { early_label };
        layers.push(spread(rng, k, label, 0.35 + (conf - 0.35) * progress));
    }
    layers.push(final_probs);
    ModelItem { checkpoints, layers }
}

/// Generates a deterministic bundle from `config`.
pub fn generate_pool(config: &PoolConfig) -> Result<PredictionBundle, SynthError> {
    config.validate()?;
    let (n, k, m) = (config.items, config.k, config.models);
    let plans: Vec<ItemPlan> = (0..n).map(|i| plan_item(config, i)).collect();

    // Failure decisions come first so that confidence can depend on the pool's failure share.
    let mut rngs: Vec<Vec<ChaCha8Rng>> = (0..n)
        .map(|i| (0..m).map(|j| stream(config.seed, i, 1 + j as u64)).collect())
        .collect();
    let fail_prob = |plan: &ItemPlan| match config.coupling {
        Coupling::InvertedU | Coupling::Independent => plan.difficulty,
        _ => 0.9 * plan.difficulty,
    };
    let fails: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| rngs[i][j].random::<f64>() < fail_prob(&plans[i]))
                .collect()
        })
        .collect();

    let mut checkpoints: Vec<Vec<f32>> = (0..m)
        .map(|j| vec![0.0; config.checkpoint_count(j) * n * k])
        .collect();
    let mut layers: Vec<Vec<f32>> = (0..m)
        .map(|j| vec![0.0; config.layer_count(j) * n * k])
        .collect();
    for i in 0..n {
        let share = fails[i].iter().filter(|&&f| f).count() as f64 / m as f64;
        for j in 0..m {
            let out = model_item(config, &plans[i], j, fails[i][j], share, &mut rngs[i][j]);
            for (c, probs) in out.checkpoints.iter().enumerate() {
                let start = (c * n + i) * k;
                for (dst, &v) in checkpoints[j][start..start + k].iter_mut().zip(probs) {
                    *dst = v as f32;
                }
            }
            for (l, probs) in out.layers.iter().enumerate() {
                let start = (l * n + i) * k;
                for (dst, &v) in layers[j][start..start + k].iter_mut().zip(probs) {
                    *dst = v as f32;
                }
            }
        }
    }

    let items = plans
        .into_iter()
        .enumerate()
        .map(|(i, plan)| AnnotationRecord::new(format!("item{i:05}"), plan.votes))
        .collect();
    let models = checkpoints
        .into_iter()
        .zip(layers)
        .enumerate()
        .map(|(j, (checkpoints, layers))| ModelTensors {
            meta: ModelMeta {
                model_id: format!("model{j:02}"),
                layer_count: config.layer_count(j),
                checkpoint_count: config.checkpoint_count(j),
                param_count: 100_000_000 * (1 + j as u64 % 4),
                plm_family: Some(format!("plm{}", j % 3)),
                train_split_id: Some(format!("split{}", j % 5)),
                label_mode: LabelMode::Hard,
            },
            checkpoints,
            layers,
        })
        .collect();
    let class_names = (0..k).map(|c| format!("class{c}")).collect();
    let pool_id = format!("synth-{}-{}", config.coupling, config.seed);
    PredictionBundle::new(pool_id, class_names, items, models)
        .map_err(|e| SynthError::InvalidConfig(format!("generated bundle failed validation: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::indicators::{IndicatorId, IndicatorTable};
    use crate::stats::spearman;

    #[test]
    fn same_seed_same_bundle() {
        let cfg = PoolConfig { items: 50, seed: 7, ..Default::default() };
        assert_eq!(generate_pool(&cfg).unwrap(), generate_pool(&cfg).unwrap());
        let other = PoolConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate_pool(&cfg).unwrap(), generate_pool(&other).unwrap());
    }

    #[test]
    fn zero_ambiguity_is_unanimous() {
        let cfg = PoolConfig { items: 40, ambiguity: 0.0, ..Default::default() };
        let b = generate_pool(&cfg).unwrap();
        for r in b.items() {
            assert_eq!(r.votes.iter().filter(|&&v| v > 0).count(), 1);
        }
    }

    #[test]
    fn adding_models_keeps_existing_draws() {
        let small = generate_pool(&PoolConfig { items: 20, models: 2, ..Default::default() }).unwrap();
        let large = generate_pool(&PoolConfig { items: 20, models: 4, ..Default::default() }).unwrap();
        assert_eq!(small.items(), large.items());
        // Confidence depends on the failure share only in the inverted-U mode.
        assert_eq!(small.models()[0].checkpoints, large.models()[0].checkpoints);
        assert_eq!(small.models()[1].layers, large.models()[1].layers);
    }

    #[test]
    fn heterogeneous_depths() {
        let cfg = PoolConfig {
            items: 10,
            models: 3,
            checkpoints: vec![1, 2, 3],
            layers: vec![2, 4, 6],
            coupling: Coupling::InvertedU,
            ..Default::default()
        };
        let b = generate_pool(&cfg).unwrap();
        assert_eq!(b.meta(2).layer_count, 6);
        assert_eq!(b.meta(0).checkpoint_count, 1);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            PoolConfig { k: 1, ..Default::default() },
            PoolConfig { items: 0, ..Default::default() },
            PoolConfig { ambiguity: 1.5, ..Default::default() },
            PoolConfig { layers: vec![1, 2], ..Default::default() },
            PoolConfig { checkpoints: vec![0], ..Default::default() },
            PoolConfig { annotators: 0, ..Default::default() },
        ] {
            assert!(matches!(generate_pool(&cfg), Err(SynthError::InvalidConfig(_))));
        }
    }

    #[test]
    fn aligned_entropies_correlate() {
        let cfg = PoolConfig { items: 1000, seed: 11, ..Default::default() };
        let b = generate_pool(&cfg).unwrap();
        let t = IndicatorTable::compute(&b, &[], Execution::Parallel).unwrap();
        let h = t.column(IndicatorId::HumanEntropy).unwrap().to_f64_lossy();
        let m = t.column(IndicatorId::AvgModelEntropy).unwrap().to_f64_lossy();
        let rho = spearman(&h, &m).unwrap().value();
        assert!(rho > 0.5, "rho = {rho}");
    }
}
