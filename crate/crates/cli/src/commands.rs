use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use cplx_core::conformal::CpConfig;
use cplx_core::human::tied_items;
use cplx_core::indicators::{IndicatorFamily, IndicatorId, IndicatorTable};
use cplx_core::ingest::{load_bundle, write_bundle};
use cplx_core::stats::{
    correlation_matrix, mann_whitney_with, match_rate_effect, partition_by_pool_success, r2_matrix,
    Alternative, CorrelationTable, Grouping, MannWhitneyOptions, Partition, PartitionRule, StatsError,
};
use cplx_core::{
    generate_pool, Coupling, Execution, IndicatorVector, PoolConfig, PredictionBundle, StatResult,
};

use crate::output::{format_float, format_opt, to_json, Meta, OutDir};
use crate::{AlphaArgs, CliError, Command, RuleArgs};

const TIED_REASON: &str = "tied_plurality";

pub fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate { bundle, out } => validate(&bundle, out.as_deref(), stdout, stderr),
        Command::Indicators { bundle, out, alphas } => indicators(&bundle, &out, &alphas),
        Command::Correlate { bundle, out, alphas, partition, r2, rule, x, y, strict } => {
            let opts = CorrelateOptions { partition, r2, rule, x, y, strict };
            correlate(&bundle, &out, &alphas, &opts)
        }
        Command::Utest { bundle, out, grouping, rule, alternative } => {
            utest(&bundle, &out, grouping.as_deref(), &rule, &alternative)
        }
        Command::Synth { out, items, models, k, checkpoints, layers, annotators, ambiguity, coupling, seed } => {
            let coupling: Coupling = coupling.parse().map_err(CliError::Usage)?;
            let config = PoolConfig { items, models, k, checkpoints, layers, annotators, ambiguity, coupling, seed };
            synth(&config, &out, stdout)
        }
    }
}

fn checked_alphas(args: &AlphaArgs) -> Result<Vec<f64>, CliError> {
    for &a in &args.alphas {
        CpConfig::new(a).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(args.alphas.clone())
}

fn checked_rule(args: &RuleArgs) -> Result<PartitionRule, CliError> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage(format!("threshold {} outside [0, 1]", args.threshold)));
    }
    Ok(PartitionRule { threshold: args.threshold, inclusive: args.inclusive })
}

fn rule_flags(flags: &mut BTreeMap<String, Value>, rule: PartitionRule) {
    flags.insert("threshold".into(), json!(rule.threshold));
    flags.insert("inclusive".into(), json!(rule.inclusive));
}

fn compute_table(bundle: &PredictionBundle, alphas: &[f64]) -> Result<IndicatorTable, CliError> {
    IndicatorTable::compute(bundle, alphas, Execution::Parallel)
        .map_err(|e| CliError::Degenerate(format!("conformal calibration: {e}")))
}

#[derive(Serialize)]
struct ValidateReport {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_class: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<Value>,
    tied_items: Vec<String>,
}

fn validate(path: &Path, out: Option<&Path>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_bundle(path);
    let report = match &loaded {
        Ok(bundle) => {
            let tied = tied_items(bundle);
            if !tied.is_empty() {
                let _ = writeln!(
                    stderr,
                    "warning: {} item(s) have no unique majority label and are skipped by reference-dependent indicators: {}",
                    tied.len(),
                    tied.join(", ")
                );
            }
            ValidateReport {
                status: "ok",
                error_class: None,
                message: None,
                summary: Some(json!({
                    "pool_id": bundle.pool_id(),
                    "items": bundle.item_count(),
                    "models": bundle.model_count(),
                    "k": bundle.k(),
                    "bundle_hash": bundle.content_hash(),
                })),
                tied_items: tied,
            }
        }
        Err(e) => ValidateReport {
            status: "error",
            error_class: Some(e.code()),
            message: Some(e.to_string()),
            summary: None,
            tied_items: Vec::new(),
        },
    };
    let text = to_json(&report);
    let _ = stdout.write_all(text.as_bytes());
    if let Some(out) = out {
        OutDir::create(out)?.write_json("validate.json", &report)?;
    }
    loaded.map(|_| ()).map_err(CliError::from)
}

fn indicators(path: &Path, out: &Path, alphas: &AlphaArgs) -> Result<(), CliError> {
    let alphas = checked_alphas(alphas)?;
    let bundle = load_bundle(path)?;
    let table = compute_table(&bundle, &alphas)?;
    let dir = OutDir::create(out)?;

    let mut header = vec!["item_id".to_string()];
    header.extend(table.columns.iter().map(|c| c.indicator_id.clone()));
    header.push("null_reason".into());
    let rows: Vec<Vec<String>> = bundle
        .items()
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let mut row = vec![record.item_id.clone()];
            row.extend(table.columns.iter().map(|c| format_opt(c.get(i))));
            let reason = if table.majority[i].is_none() { TIED_REASON } else { "" };
            row.push(reason.into());
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.write_csv("indicators.csv", &header_refs, &rows)?;

    let mut flags = BTreeMap::new();
    flags.insert("alphas".into(), json!(alphas));
    let mut meta = Meta::new("indicators", bundle.content_hash(), flags);
    meta.files.push("indicators.csv".into());
    dir.write_json("indicators.meta.json", &meta)
}

struct CorrelateOptions {
    partition: bool,
    r2: bool,
    rule: RuleArgs,
    x: Option<String>,
    y: String,
    strict: bool,
}

const TABLE_HEADER: [&str; 7] = ["table", "row", "col", "statistic", "value", "n", "reason"];

fn table_rows(name: &str, table: &CorrelationTable, rows: &mut Vec<Vec<String>>) {
    for (r, row_id) in table.row_ids.iter().enumerate() {
        for (c, col_id) in table.col_ids.iter().enumerate() {
            let (statistic, value, n, reason) = match &table.cells[r][c] {
                Ok(StatResult::Spearman { rho, n }) => ("spearman", format_float(*rho), n.to_string(), String::new()),
                Ok(StatResult::OlsR2 { r2, n }) => ("r2", format_float(*r2), n.to_string(), String::new()),
                Ok(other) => ("other", format_float(other.value()), String::new(), String::new()),
                Err(e) => ("", String::new(), String::new(), e.code().to_string()),
            };
            rows.push(vec![
                name.to_string(),
                row_id.clone(),
                col_id.clone(),
                statistic.to_string(),
                value,
                n,
                reason,
            ]);
        }
    }
}

fn find_column<'a>(table: &'a IndicatorTable, name: &str, family: IndicatorFamily) -> Result<&'a IndicatorVector, CliError> {
    let id: IndicatorId = name.parse().map_err(CliError::Usage)?;
    if id.family() != family {
        return Err(CliError::Usage(format!("{name} is not a {family:?} indicator")));
    }
    table
        .column(id)
        .ok_or_else(|| CliError::Usage(format!("{name} is not computed with the requested alphas")))
}

fn correlate(path: &Path, out: &Path, alphas: &AlphaArgs, opts: &CorrelateOptions) -> Result<(), CliError> {
    let alphas = checked_alphas(alphas)?;
    let rule = checked_rule(&opts.rule)?;
    let bundle = load_bundle(path)?;
    let table = compute_table(&bundle, &alphas)?;
    let dir = OutDir::create(out)?;
    let exec = Execution::Parallel;

    let human = table.by_family(IndicatorFamily::Human);
    let free = table.by_family(IndicatorFamily::ReferenceFree);
    let dependent = table.by_family(IndicatorFamily::ReferenceDependent);
    let model: Vec<&IndicatorVector> = free.iter().chain(&dependent).copied().collect();

    let mut files = vec!["correlations.csv".to_string()];
    type Matrix = fn(&[&IndicatorVector], &[&IndicatorVector], Option<&[usize]>, Execution) -> CorrelationTable;
    let mut tables: Vec<(&str, Matrix)> = vec![("correlations.csv", correlation_matrix)];
    if opts.r2 {
        tables.push(("r2.csv", r2_matrix));
        files.push("r2.csv".into());
    }

    let partition = opts.partition.then(|| {
        partition_by_pool_success(table.column(IndicatorId::PoolFailure).expect("always computed"), rule)
    });
    let mut degenerate = 0;
    for (file, stat) in &tables {
        let mut rows = Vec::new();
        let full = stat(&model, &human, None, exec);
        degenerate += full.degenerate_cells();
        table_rows("model_vs_human", &full, &mut rows);
        if let Some(Partition { fail, success }) = &partition {
            for (name, mask) in [("models_full", None), ("models_fail", Some(fail.as_slice())), ("models_success", Some(success.as_slice()))] {
                let t = stat(&free, &dependent, mask, exec);
                degenerate += t.degenerate_cells();
                table_rows(name, &t, &mut rows);
            }
        }
        dir.write_csv(file, &TABLE_HEADER, &rows)?;
    }

    let mut flags = BTreeMap::new();
    flags.insert("alphas".into(), json!(alphas));
    flags.insert("partition".into(), json!(opts.partition));
    flags.insert("r2".into(), json!(opts.r2));
    flags.insert("strict".into(), json!(opts.strict));
    rule_flags(&mut flags, rule);

    if let Some(part) = &partition {
        let default_x = alphas
            .iter()
            .copied()
            .min_by(f64::total_cmp)
            .map(|a| IndicatorId::ConformalSetSize { alpha: a }.to_string())
            .unwrap_or_else(|| IndicatorId::AvgModelEntropy.to_string());
        let x_name = opts.x.clone().unwrap_or(default_x);
        let x = find_column(&table, &x_name, IndicatorFamily::ReferenceFree)?;
        let y = find_column(&table, &opts.y, IndicatorFamily::ReferenceDependent)?;
        let membership = |i: usize| {
            if part.fail.binary_search(&i).is_ok() {
                "fail"
            } else if part.success.binary_search(&i).is_ok() {
                "success"
            } else {
                ""
            }
        };
        let rows: Vec<Vec<String>> = bundle
            .items()
            .iter()
            .enumerate()
            .map(|(i, record)| {
                let reason = if table.majority[i].is_none() { TIED_REASON } else { "" };
                vec![
                    record.item_id.clone(),
                    format_opt(x.get(i)),
                    format_opt(y.get(i)),
                    membership(i).into(),
                    reason.into(),
                ]
            })
            .collect();
        let header = ["item_id", x.indicator_id.as_str(), y.indicator_id.as_str(), "partition", "null_reason"];
        dir.write_csv("points.csv", &header, &rows)?;
        files.push("points.csv".into());
        flags.insert("x".into(), json!(x.indicator_id));
        flags.insert("y".into(), json!(y.indicator_id));
    }

    let mut meta = Meta::new("correlate", bundle.content_hash(), flags);
    meta.files = files;
    dir.write_json("correlate.meta.json", &meta)?;
    if opts.strict && degenerate > 0 {
        return Err(CliError::Degenerate(format!("{degenerate} degenerate table cell(s)")));
    }
    Ok(())
}

fn stats_error(e: StatsError) -> CliError {
    match e {
        StatsError::MissingMetadata(field) => CliError::MissingMetadata(field),
        other => CliError::Degenerate(other.to_string()),
    }
}

#[derive(Serialize)]
struct UtestReport {
    test: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    grouping: Option<String>,
    sample_a: &'static str,
    sample_b: &'static str,
    alternative: String,
    result: StatResult,
}

fn utest(path: &Path, out: &Path, grouping: Option<&str>, rule: &RuleArgs, alternative: &str) -> Result<(), CliError> {
    let rule = checked_rule(rule)?;
    let alt = match alternative {
        "two-sided" => Alternative::TwoSided,
        "greater" => Alternative::Greater,
        "less" => Alternative::Less,
        other => return Err(CliError::Usage(format!("unknown alternative {other:?}"))),
    };
    let grouping = grouping
        .map(|g| g.parse::<Grouping>().map_err(CliError::Usage))
        .transpose()?;
    let bundle = load_bundle(path)?;
    let opts = MannWhitneyOptions { alternative: alt, ..Default::default() };
    let mut flags = BTreeMap::new();
    flags.insert("alternative".into(), json!(alternative));

    let report = match grouping {
        None => {
            let table = compute_table(&bundle, &[])?;
            let part = partition_by_pool_success(table.column(IndicatorId::PoolFailure).expect("always computed"), rule);
            let dis = table.column(IndicatorId::HumanDissensus).expect("always computed");
            let pick = |items: &[usize]| -> Vec<f64> { items.iter().filter_map(|&i| dis.get(i)).collect() };
            let result = mann_whitney_with(&pick(&part.fail), &pick(&part.success), opts).map_err(stats_error)?;
            rule_flags(&mut flags, rule);
            UtestReport {
                test: "dissensus_vs_failure",
                grouping: None,
                sample_a: "H_dis of items the pool fails on",
                sample_b: "H_dis of items the pool succeeds on",
                alternative: alternative.into(),
                result,
            }
        }
        Some(g) => {
            let result = match_rate_effect(&bundle, g, opts).map_err(stats_error)?;
            let name = match g {
                Grouping::SamePlm => "same_plm",
                Grouping::SameSplit => "same_split",
                Grouping::ParamCountDiff => "param_diff",
            };
            flags.insert("grouping".into(), json!(name));
            let (a, b) = match g {
                Grouping::ParamCountDiff => (
                    "parameter-count gap of model pairs whose predictions match",
                    "parameter-count gap of model pairs whose predictions differ",
                ),
                _ => ("prediction match of same-group model pairs", "prediction match of cross-group model pairs"),
            };
            UtestReport {
                test: "match_rate_effect",
                grouping: Some(name.into()),
                sample_a: a,
                sample_b: b,
                alternative: alternative.into(),
                result,
            }
        }
    };
    let dir = OutDir::create(out)?;
    dir.write_json("utest.json", &report)?;
    let mut meta = Meta::new("utest", bundle.content_hash(), flags);
    meta.files.push("utest.json".into());
    dir.write_json("utest.meta.json", &meta)
}

fn synth(config: &PoolConfig, out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let bundle = generate_pool(config).map_err(|e| CliError::Usage(e.to_string()))?;
    write_bundle(&bundle, out)?;
    let summary = json!({
        "pool_id": bundle.pool_id(),
        "items": bundle.item_count(),
        "models": bundle.model_count(),
        "k": bundle.k(),
        "bundle_hash": bundle.content_hash(),
    });
    let _ = stdout.write_all(to_json(&summary).as_bytes());
    Ok(())
}
