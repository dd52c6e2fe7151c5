//! Domain types shared by the indicator and statistics modules.
//!
//! Probabilities are stored as `f32` inside bundles and always promoted to
//! `f64` before any arithmetic. Every reduction runs in ascending index order
//! so that repeated runs are bitwise identical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for distributions constructed in memory.
pub const INTERNAL_TOLERANCE: f64 = 1e-6;
/// Tolerance for distributions read back from `f32` storage.
pub const STORAGE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("a label distribution needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("probability {value} at class {class} is outside [0, 1]")]
    OutOfRange { class: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
}

/// Read access to a probability vector over `k` classes.
///
/// Implemented for validated [`LabelDistribution`]s and for raw `f32`/`f64`
/// rows so that bundle slices can be scored without copying.
pub trait ProbVector {
    fn class_count(&self) -> usize;
    fn prob(&self, class: usize) -> f64;
}

impl ProbVector for [f32] {
    fn class_count(&self) -> usize {
        self.len()
    }
    fn prob(&self, class: usize) -> f64 {
        f64::from(self[class])
    }
}

impl ProbVector for [f64] {
    fn class_count(&self) -> usize {
        self.len()
    }
    fn prob(&self, class: usize) -> f64 {
        self[class]
    }
}

impl<T: ProbVector + ?Sized> ProbVector for &T {
    fn class_count(&self) -> usize {
        (**self).class_count()
    }
    fn prob(&self, class: usize) -> f64 {
        (**self).prob(class)
    }
}

impl ProbVector for Vec<f64> {
    fn class_count(&self) -> usize {
        self.len()
    }
    fn prob(&self, class: usize) -> f64 {
        self[class]
    }
}

/// A validated probability vector (human `Pr_H` or model-vote `Pr_M`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        Self::with_tolerance(probs, INTERNAL_TOLERANCE)
    }

    pub fn with_tolerance(probs: Vec<f64>, tol: f64) -> Result<Self, DistributionError> {
        check_probabilities(&probs, tol)?;
        Ok(Self { probs })
    }

    /// Point mass on `class`.
    pub fn point_mass(k: usize, class: usize) -> Result<Self, DistributionError> {
        let mut probs = vec![0.0; k];
        if class < k {
            probs[class] = 1.0;
        }
        Self::new(probs)
    }

    pub fn uniform(k: usize) -> Result<Self, DistributionError> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

impl ProbVector for LabelDistribution {
    fn class_count(&self) -> usize {
        self.probs.len()
    }
    fn prob(&self, class: usize) -> f64 {
        self.probs[class]
    }
}

/// Checks `k >= 2`, entries in `[0, 1]` and a unit sum within `tol`.
pub fn check_probabilities<P: ProbVector + ?Sized>(
    probs: &P,
    tol: f64,
) -> Result<(), DistributionError> {
    let k = probs.class_count();
    if k < 2 {
        return Err(DistributionError::TooFewClasses(k));
    }
    let mut sum = 0.0;
    for class in 0..k {
        let value = probs.prob(class);
        if !value.is_finite() || !(0.0..=1.0 + tol).contains(&value) {
            return Err(DistributionError::OutOfRange { class, value });
        }
        sum += value;
    }
    if (sum - 1.0).abs() > tol {
        return Err(DistributionError::NotNormalized { sum });
    }
    Ok(())
}

/// Lowest class index attaining the maximum probability.
pub fn canonical_argmax<P: ProbVector + ?Sized>(dist: &P) -> usize {
    let mut best = 0;
    let mut best_p = dist.prob(0);
    for class in 1..dist.class_count() {
        let p = dist.prob(class);
        if p > best_p {
            best = class;
            best_p = p;
        }
    }
    best
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
///
/// Terms are summed in sorted order, so permuting the classes gives a
/// bitwise-identical result and tied items stay tied.
pub fn shannon_entropy<P: ProbVector + ?Sized>(dist: &P) -> f64 {
    let mut probs: Vec<f64> = (0..dist.class_count())
        .map(|c| dist.prob(c))
        .filter(|&p| p > 0.0)
        .collect();
    probs.sort_by(f64::total_cmp);
    let h: f64 = probs.iter().map(|&p| -p * p.ln()).sum();
    // Rounding can leave -0.0 or a tiny negative value on point masses.
    h.max(0.0)
}

/// Arithmetic mean that does not depend on the order of `values`.
///
/// Values are summed in sorted order, so two items whose per-model scores
/// are the same multiset get bitwise-equal means and tie under ranking.
pub fn order_free_mean(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "mean of nothing");
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-item vote counts from the annotator pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub votes: Vec<u32>,
}

impl AnnotationRecord {
    pub fn new(item_id: impl Into<String>, votes: Vec<u32>) -> Self {
        Self { item_id: item_id.into(), votes }
    }

    /// Total annotator count.
    pub fn n(&self) -> u32 {
        self.votes.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Hard,
    Soft,
    #[default]
    Unknown,
}

/// Identity and shape of one classifier in the pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    pub layer_count: usize,
    pub checkpoint_count: usize,
    /// Parameter count, 0 when unknown.
    #[serde(default)]
    pub param_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plm_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_split_id: Option<String>,
    #[serde(default)]
    pub label_mode: LabelMode,
}

impl ModelMeta {
    pub fn new(model_id: impl Into<String>, layer_count: usize, checkpoint_count: usize) -> Self {
        Self {
            model_id: model_id.into(),
            layer_count,
            checkpoint_count,
            param_count: 0,
            plm_family: None,
            train_split_id: None,
            label_mode: LabelMode::Unknown,
        }
    }
}

/// Per-item scores for one indicator.
///
/// `None` marks items the indicator is undefined for (items without a unique
/// majority label for reference-dependent and conformal indicators). Every
/// present value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorVector {
    pub indicator_id: String,
    pub values: Vec<Option<f64>>,
    pub params: BTreeMap<String, f64>,
    pub pool_id: String,
}

impl IndicatorVector {
    pub fn new(indicator_id: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            indicator_id: indicator_id.into(),
            values,
            params: BTreeMap::new(),
            pool_id: String::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_pool(mut self, pool_id: impl Into<String>) -> Self {
        self.pool_id = pool_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, item: usize) -> Option<f64> {
        self.values.get(item).copied().flatten()
    }

    /// Values with `None` replaced by NaN; convenient for numeric comparisons in tests.
    pub fn to_f64_lossy(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApprox,
}

/// Output of one statistical procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatResult {
    Spearman {
        rho: f64,
        n: usize,
    },
    MannWhitney {
        u: f64,
        p: f64,
        /// Common-language effect size `U / (n1 n2)`.
        f: f64,
        n1: usize,
        n2: usize,
        method: PValueMethod,
    },
    OlsR2 {
        r2: f64,
        n: usize,
    },
}

impl StatResult {
    /// The headline statistic: rho, f, or R².
    pub fn value(&self) -> f64 {
        match *self {
            StatResult::Spearman { rho, .. } => rho,
            StatResult::MannWhitney { f, .. } => f,
            StatResult::OlsR2 { r2, .. } => r2,
        }
    }

    pub fn p_value(&self) -> Option<f64> {
        match *self {
            StatResult::MannWhitney { p, .. } => Some(p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn argmax_examples() {
        assert_eq!(canonical_argmax(&[0.2, 0.5, 0.3][..]), 1);
        assert_eq!(canonical_argmax(&[0.4, 0.4, 0.2][..]), 0);
        let third = 1.0 / 3.0;
        assert_eq!(canonical_argmax(&[third, third, third][..]), 0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0][..]), 0.0);
        let u = LabelDistribution::uniform(3).unwrap();
        assert!((shannon_entropy(&u) - 3f64.ln()).abs() < 1e-12);
        // tools/derive_expected.py
        assert!((shannon_entropy(&[0.6, 0.2, 0.2][..]) - 0.9502705392332347).abs() < 1e-9);
    }

    #[test]
    fn rejects_invalid_distributions() {
        assert_eq!(
            LabelDistribution::new(vec![1.0]),
            Err(DistributionError::TooFewClasses(1))
        );
        assert!(matches!(
            LabelDistribution::new(vec![0.5, 0.6, 0.2]),
            Err(DistributionError::NotNormalized { .. })
        ));
        assert!(matches!(
            LabelDistribution::new(vec![-0.1, 1.1]),
            Err(DistributionError::OutOfRange { class: 0, .. })
        ));
        assert!(LabelDistribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, k).prop_filter_map("nonzero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-3).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn entropy_bounds(k in 2usize..6) {
            let ln_k = (k as f64).ln();
            let point = LabelDistribution::point_mass(k, k - 1).unwrap();
            prop_assert_eq!(shannon_entropy(&point), 0.0);
            let u = LabelDistribution::uniform(k).unwrap();
            prop_assert!((shannon_entropy(&u) - ln_k).abs() < 1e-12);
        }

        #[test]
        fn entropy_within_zero_and_ln_k(p in (2usize..6).prop_flat_map(simplex)) {
            let h = shannon_entropy(&p[..]);
            let k = p.len();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (k as f64).ln() + 1e-12);
            let is_point = p.contains(&1.0);
            prop_assert_eq!(h == 0.0, is_point || p.iter().filter(|&&x| x > 0.0).count() == 1);
        }

        #[test]
        fn argmax_follows_class_permutation(p in (2usize..6).prop_flat_map(simplex), rot in 0usize..6) {
            let k = p.len();
            let best = canonical_argmax(&p[..]);
            let unique = p.iter().filter(|&&x| x == p[best]).count() == 1;
            prop_assume!(unique);
            let shift = rot % k;
            // class c moves to (c + shift) mod k
            let mut permuted = vec![0.0; k];
            for (c, &x) in p.iter().enumerate() {
                permuted[(c + shift) % k] = x;
            }
            prop_assert_eq!(canonical_argmax(&permuted[..]), (best + shift) % k);
        }

        #[test]
        fn entropy_is_bitwise_permutation_invariant(p in (2usize..6).prop_flat_map(simplex), rot in 0usize..6) {
            let k = p.len();
            let mut rotated = p.clone();
            rotated.rotate_left(rot % k);
            let mut reversed = p.clone();
            reversed.reverse();
            let h = shannon_entropy(&p[..]);
            prop_assert_eq!(h.to_bits(), shannon_entropy(&rotated[..]).to_bits());
            prop_assert_eq!(h.to_bits(), shannon_entropy(&reversed[..]).to_bits());
        }
    }
}
