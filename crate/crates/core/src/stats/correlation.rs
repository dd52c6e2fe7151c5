use super::rank::average_ranks;
use super::{check_finite, StatsError};
use crate::types::StatResult;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation, or `None` if either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(StatsError::TooFewSamples { n: x.len(), min });
    }
    check_finite(x)?;
    check_finite(y)
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    check_pair(x, y, 3)?;
    let rho = pearson(&average_ranks(x), &average_ranks(y)).ok_or(StatsError::DegenerateInput)?;
    Ok(StatResult::Spearman { rho, n: x.len() })
}

/// R² of the least-squares line of `y` on `x`; 0 when either input is constant.
pub fn ols_r2(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    check_pair(x, y, 3)?;
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sst: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || sst == 0.0 {
        return Ok(StatResult::OlsR2 { r2: 0.0, n });
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
    Ok(StatResult::OlsR2 { r2, n })
}
