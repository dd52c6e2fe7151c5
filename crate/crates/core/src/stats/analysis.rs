use std::str::FromStr;

use super::correlation::{ols_r2, spearman};
use super::mann_whitney::{mann_whitney_with, MannWhitneyOptions};
use super::StatsError;
use crate::bundle::PredictionBundle;
use crate::exec::Execution;
use crate::types::{canonical_argmax, IndicatorVector, StatResult};

/// Boundary for "the pool fails on this item".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionRule {
    pub threshold: f64,
    /// Count `rate == threshold` as failure.
    pub inclusive: bool,
}

impl Default for PartitionRule {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            inclusive: false,
        }
    }
}

impl PartitionRule {
    pub fn fails(&self, rate: f64) -> bool {
        if self.inclusive {
            rate >= self.threshold
        } else {
            rate > self.threshold
        }
    }
}

/// Item indices split by pool failure; items without a rate are in neither set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub fail: Vec<usize>,
    pub success: Vec<usize>,
}

pub fn partition_by_pool_success(fail_rates: &IndicatorVector, rule: PartitionRule) -> Partition {
    let mut fail = Vec::new();
    let mut success = Vec::new();
    for (item, rate) in fail_rates.values.iter().enumerate() {
        match rate {
            Some(r) if rule.fails(*r) => fail.push(item),
            Some(_) => success.push(item),
            None => {}
        }
    }
    Partition { fail, success }
}

/// Spearman (or R²) cells for every (row, column) indicator pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub cells: Vec<Vec<Result<StatResult, StatsError>>>,
}

impl CorrelationTable {
    pub fn cell(&self, row: &str, col: &str) -> Option<&Result<StatResult, StatsError>> {
        let r = self.row_ids.iter().position(|id| id == row)?;
        let c = self.col_ids.iter().position(|id| id == col)?;
        Some(&self.cells[r][c])
    }

    pub fn degenerate_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_err()).count()
    }
}

/// Values at `items` where both vectors are defined.
fn paired(x: &IndicatorVector, y: &IndicatorVector, items: &[usize]) -> (Vec<f64>, Vec<f64>) {
    items
        .iter()
        .filter_map(|&i| Some((x.get(i)?, y.get(i)?)))
        .unzip()
}

fn table(
    rows: &[&IndicatorVector],
    cols: &[&IndicatorVector],
    mask: Option<&[usize]>,
    exec: Execution,
    stat: fn(&[f64], &[f64]) -> Result<StatResult, StatsError>,
) -> CorrelationTable {
    let n = rows.iter().chain(cols).map(|v| v.len()).max().unwrap_or(0);
    let all: Vec<usize> = (0..n).collect();
    let items = mask.unwrap_or(&all);
    let width = cols.len();
    let flat = exec.map(rows.len() * width, |cell| {
        let (x, y) = (rows[cell / width], cols[cell % width]);
        if x.len() != y.len() {
            return Err(StatsError::LengthMismatch(x.len(), y.len()));
        }
        let (xs, ys) = paired(x, y, items);
        stat(&xs, &ys)
    });
    let mut cells: Vec<Vec<_>> = Vec::with_capacity(rows.len());
    let mut it = flat.into_iter();
    for _ in 0..rows.len() {
        cells.push(it.by_ref().take(width).collect());
    }
    CorrelationTable {
        row_ids: rows.iter().map(|v| v.indicator_id.clone()).collect(),
        col_ids: cols.iter().map(|v| v.indicator_id.clone()).collect(),
        cells,
    }
}

/// Spearman rho for every (row, column) pair over the masked items.
pub fn correlation_matrix(
    rows: &[&IndicatorVector],
    cols: &[&IndicatorVector],
    mask: Option<&[usize]>,
    exec: Execution,
) -> CorrelationTable {
    table(rows, cols, mask, exec, spearman)
}

/// R² of the least-squares fit predicting each row indicator from each column indicator.
pub fn r2_matrix(
    rows: &[&IndicatorVector],
    cols: &[&IndicatorVector],
    mask: Option<&[usize]>,
    exec: Execution,
) -> CorrelationTable {
    fn predict_row_from_col(row: &[f64], col: &[f64]) -> Result<StatResult, StatsError> {
        ols_r2(col, row)
    }
    table(rows, cols, mask, exec, predict_row_from_col)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    SamePlm,
    SameSplit,
    ParamCountDiff,
}

impl FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "same_plm" => Ok(Grouping::SamePlm),
            "same_split" => Ok(Grouping::SameSplit),
            "param_diff" | "param_count_diff" => Ok(Grouping::ParamCountDiff),
            other => Err(format!("unknown grouping {other:?}")),
        }
    }
}

/// Mann-Whitney effect of model relatedness on whether two models'
/// final predictions for an item match.
///
/// Samples range over unordered model pairs × items. For `SamePlm` and
/// `SameSplit`, the match indicator of same-group pairs is tested against
/// cross-group pairs (`f > 0.5`: related models agree more). For
/// `ParamCountDiff`, the absolute parameter-count difference of matching
/// pairs is tested against non-matching pairs (`f < 0.5`: matching
/// predictions come from models of more similar size).
pub fn match_rate_effect(
    bundle: &PredictionBundle,
    grouping: Grouping,
    opts: MannWhitneyOptions,
) -> Result<StatResult, StatsError> {
    let m = bundle.model_count();
    if m < 2 {
        return Err(StatsError::TooFewSamples { n: m, min: 2 });
    }
    let metas: Vec<_> = (0..m).map(|i| bundle.meta(i)).collect();
    let group_of = |i: usize| -> Option<&str> {
        match grouping {
            Grouping::SamePlm => metas[i].plm_family.as_deref(),
            Grouping::SameSplit => metas[i].train_split_id.as_deref(),
            Grouping::ParamCountDiff => None,
        }
        .filter(|g| !g.is_empty())
    };
    match grouping {
        Grouping::SamePlm if (0..m).any(|i| group_of(i).is_none()) => {
            return Err(StatsError::MissingMetadata("plm_family"))
        }
        Grouping::SameSplit if (0..m).any(|i| group_of(i).is_none()) => {
            return Err(StatsError::MissingMetadata("train_split_id"))
        }
        Grouping::ParamCountDiff if metas.iter().any(|meta| meta.param_count == 0) => {
            return Err(StatsError::MissingMetadata("param_count"))
        }
        _ => {}
    }

    let n = bundle.item_count();
    let argmax: Vec<Vec<usize>> = (0..m)
        .map(|model| (0..n).map(|i| canonical_argmax(bundle.final_probs(model, i))).collect())
        .collect();

    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let same_group = group_of(i) == group_of(j);
            let diff = metas[i].param_count.abs_diff(metas[j].param_count) as f64;
            for (x, y) in argmax[i].iter().zip(&argmax[j]) {
                let matched = x == y;
                match grouping {
                    Grouping::SamePlm | Grouping::SameSplit => {
                        let value = if matched { 1.0 } else { 0.0 };
                        if same_group { a.push(value) } else { b.push(value) }
                    }
                    Grouping::ParamCountDiff => {
                        if matched { a.push(diff) } else { b.push(diff) }
                    }
                }
            }
        }
    }
    mann_whitney_with(&a, &b, opts)
}
