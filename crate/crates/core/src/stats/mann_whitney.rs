use statrs::function::erf::erfc;

use super::rank::{average_ranks, tie_groups};
use super::{check_finite, StatsError};
use crate::types::{PValueMethod, StatResult};

/// Largest `n1 * n2` for which the p-value is computed exactly.
pub const EXACT_PAIR_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MannWhitneyOptions {
    pub alternative: Alternative,
    pub exact_pair_limit: usize,
}

impl Default for MannWhitneyOptions {
    fn default() -> Self {
        Self {
            alternative: Alternative::TwoSided,
            exact_pair_limit: EXACT_PAIR_LIMIT,
        }
    }
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
///
/// `U` counts pairs with `a_i > b_j` plus half the ties, so
/// `f = U / (n1 n2)` is the probability that a random `a` beats a random `b`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    mann_whitney_with(a, b, MannWhitneyOptions::default())
}

pub fn mann_whitney_with(
    a: &[f64],
    b: &[f64],
    opts: MannWhitneyOptions,
) -> Result<StatResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    // Doubled ranks are integers, which keeps the exact branch in integer arithmetic.
    let doubled: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
    let obs2: u64 = doubled[..n1].iter().sum();
    let u = obs2 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let f = u / (n1 * n2) as f64;

    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let groups = tie_groups(&sorted);

    let (p, method) = if n1 * n2 <= opts.exact_pair_limit {
        (exact_p(&groups, n1, obs2, opts.alternative), PValueMethod::Exact)
    } else {
        (normal_p(&groups, n1, n2, u, opts.alternative), PValueMethod::NormalApprox)
    };
    Ok(StatResult::MannWhitney {
        u,
        p: p.clamp(0.0, 1.0),
        f,
        n1,
        n2,
        method,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Permutation distribution of the doubled rank sum of `a`, conditional on
/// the observed tie structure.
fn exact_p(groups: &[usize], n1: usize, obs2: u64, alt: Alternative) -> f64 {
    let total_n: usize = groups.iter().sum();
    let n2 = total_n - n1;
    if n2 < n1 {
        // Run the recursion over the smaller sample; its rank sum mirrors ours.
        let mirrored = (total_n * (total_n + 1)) as u64 - obs2;
        let flipped = match alt {
            Alternative::TwoSided => Alternative::TwoSided,
            Alternative::Greater => Alternative::Less,
            Alternative::Less => Alternative::Greater,
        };
        return exact_p(groups, n2, mirrored, flipped);
    }
    let max_sum = 2 * n1 * total_n;
    // ways[c][s]: arrangements choosing c of the first groups' members with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    let mut first = 1usize;
    for &size in groups {
        let last = first + size - 1;
        let rank2 = first + last;
        let mut next = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
        for chosen in 0..=n1 {
            for sum in 0..=max_sum {
                let w = ways[chosen][sum];
                if w == 0.0 {
                    continue;
                }
                for take in 0..=size.min(n1 - chosen) {
                    next[chosen + take][sum + take * rank2] += w * binomial(size, take);
                }
            }
        }
        ways = next;
        first = last + 1;
    }

    let centre2 = (n1 * (total_n + 1)) as i64;
    let obs_dev = (obs2 as i64 - centre2).abs();
    let mut hit = 0.0;
    let mut total = 0.0;
    for (sum, &w) in ways[n1].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        total += w;
        let extreme = match alt {
            Alternative::TwoSided => (sum as i64 - centre2).abs() >= obs_dev,
            Alternative::Greater => sum as u64 >= obs2,
            Alternative::Less => sum as u64 <= obs2,
        };
        if extreme {
            hit += w;
        }
    }
    hit / total
}

/// Normal approximation with tie-corrected variance and continuity correction.
fn normal_p(groups: &[usize], n1: usize, n2: usize, u: f64, alt: Alternative) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let tie_term: f64 = groups.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let mu = n1f * n2f / 2.0;
    let upper_tail = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    match alt {
        Alternative::TwoSided => {
            let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
            2.0 * upper_tail(z)
        }
        Alternative::Greater => upper_tail((u - mu - 0.5) / sd),
        Alternative::Less => upper_tail(-(u - mu + 0.5) / sd),
    }
}
