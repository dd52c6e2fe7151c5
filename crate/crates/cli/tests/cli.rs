use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

fn cplx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cplx")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let bundle = dir.join("bundle");
    let mut args = vec!["synth", "--out", s(&bundle)];
    args.extend_from_slice(extra);
    let out = cplx(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    bundle
}

fn utest_result(bundle: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["utest", "--bundle", s(bundle), "--out", s(out)];
    args.extend_from_slice(extra);
    let run = cplx(&args);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("utest.json")).unwrap()).unwrap();
    report["result"].clone()
}

#[test]
fn golden_fixture_matches_independent_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cplx(&["indicators", "--bundle", s(&fixture()), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_csv(&tmp.path().join("indicators.csv"));
    let (gold_header, gold) = read_csv(&fixture().with_file_name("golden_indicators.csv"));
    assert_eq!(rows.len(), 20);
    // item_id, 10 fixed indicators plus one per alpha, null_reason
    assert_eq!(header.len(), 1 + 10 + 3 + 1);
    assert_eq!(&header[..header.len() - 1], &gold_header[..]);
    for (row, expected) in rows.iter().zip(&gold) {
        for (col, (got, want)) in row.iter().zip(expected).enumerate().skip(1) {
            if want.is_empty() {
                assert!(got.is_empty(), "{} {}", row[0], header[col]);
                assert_eq!(row.last().unwrap(), "tied_plurality");
            } else {
                let (g, w): (f64, f64) = (got.parse().unwrap(), want.parse().unwrap());
                assert!((g - w).abs() <= 1e-9, "{} {}: {g} vs {w}", row[0], header[col]);
            }
        }
    }
}

#[test]
fn validate_reports_ties_and_errors() {
    let ok = cplx(&["validate", "--bundle", s(&fixture())]);
    assert_eq!(code(&ok), 0);
    let report: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["tied_items"], serde_json::json!(["item00001", "item00013"]));
    assert!(String::from_utf8_lossy(&ok.stderr).contains("item00001"));

    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("broken");
    fs::create_dir_all(broken.join("ckpt")).unwrap();
    fs::create_dir_all(broken.join("layers")).unwrap();
    fs::copy(fixture().join("manifest.json"), broken.join("manifest.json")).unwrap();
    for sub in ["ckpt", "layers"] {
        for f in fs::read_dir(fixture().join(sub)).unwrap() {
            let f = f.unwrap();
            fs::copy(f.path(), broken.join(sub).join(f.file_name())).unwrap();
        }
    }
    let tensor = broken.join("layers/model01.f32");
    let bytes = fs::read(&tensor).unwrap();
    fs::write(&tensor, &bytes[..bytes.len() - 8]).unwrap();
    let bad = cplx(&["validate", "--bundle", s(&broken)]);
    assert_eq!(code(&bad), 2);
    let report: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["error_class"], "shape_mismatch");

    let missing = cplx(&["validate", "--bundle", s(tmp.path())]);
    assert_eq!(code(&missing), 2);
    let report: Value = serde_json::from_slice(&missing.stdout).unwrap();
    assert_eq!(report["error_class"], "manifest_missing");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&cplx(&["indicators", "--bundle", "x"])), 1);
    assert_eq!(code(&cplx(&["frobnicate"])), 1);
    let tmp = tempfile::tempdir().unwrap();
    let out = cplx(&["indicators", "--bundle", s(&fixture()), "--out", s(tmp.path()), "--alphas", "0,0.1"]);
    assert_eq!(code(&out), 1);
    let out = cplx(&["utest", "--bundle", s(&fixture()), "--out", s(tmp.path()), "--grouping", "same_moon"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&cplx(&["--help"])), 0);
}

#[test]
fn unanimous_pool_has_zero_dissensus() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = synth(tmp.path(), &["--items", "20", "--ambiguity", "0"]);
    let out = tmp.path().join("out");
    assert_eq!(code(&cplx(&["indicators", "--bundle", s(&bundle), "--out", s(&out)])), 0);
    let (header, rows) = read_csv(&out.join("indicators.csv"));
    let col = header.iter().position(|h| h == "H_dis").unwrap();
    assert!(rows.iter().all(|r| r[col] == "0"));
}

#[test]
fn partitioned_tables_on_the_inverted_u_pool() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = synth(tmp.path(), &["--items", "1000", "--coupling", "inverted_u", "--seed", "1"]);
    let out = tmp.path().join("out");
    let run = cplx(&["correlate", "--bundle", s(&bundle), "--out", s(&out), "--partition", "--r2", "--strict"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let (_, rows) = read_csv(&out.join("correlations.csv"));
    let value = |table: &str, r: &str, c: &str| -> f64 {
        rows.iter().find(|x| x[0] == table && x[1] == r && x[2] == c).unwrap()[4].parse().unwrap()
    };
    let free = ["M_dis", "M_ent", "M_avg_ent", "M_CP_0.05", "M_CP_0.1", "M_CP_0.2"];
    let dependent = ["M_fail", "M_1st_layer", "M_1st_ckpt", "M_avg_ckpt", "M_avg_ckpt_p"];
    for r in free {
        for c in dependent {
            assert!(value("models_fail", r, c) < 0.0);
            assert!(value("models_success", r, c) > 0.0);
        }
    }
    // 11 model indicators x 2 human + 3 partitioned tables of 6 x 5
    assert_eq!(rows.len(), 22 + 3 * 30);
    let (_, r2_rows) = read_csv(&out.join("r2.csv"));
    assert_eq!(r2_rows.len(), rows.len());
    let (points_header, points) = read_csv(&out.join("points.csv"));
    assert_eq!(points_header, ["item_id", "M_CP_0.05", "M_1st_layer", "partition", "null_reason"]);
    assert_eq!(points.len(), 1000);
}

#[test]
fn strict_mode_flags_degenerate_cells() {
    let tmp = tempfile::tempdir().unwrap();
    // A single model never disagrees with itself, so pool dissensus is constant.
    let bundle = synth(tmp.path(), &["--items", "50", "--models", "1"]);
    let out = tmp.path().join("out");
    assert_eq!(code(&cplx(&["correlate", "--bundle", s(&bundle), "--out", s(&out)])), 0);
    let (_, rows) = read_csv(&out.join("correlations.csv"));
    let cell = rows.iter().find(|r| r[1] == "M_dis" && r[2] == "H_dis").unwrap();
    assert_eq!((cell[4].as_str(), cell[6].as_str()), ("", "degenerate_input"));
    assert_eq!(code(&cplx(&["correlate", "--bundle", s(&bundle), "--out", s(&out), "--strict"])), 3);
}

#[test]
fn dissensus_failure_link() {
    let tmp = tempfile::tempdir().unwrap();
    let planted = synth(&tmp.path().join("a"), &["--items", "1000", "--seed", "1"]);
    let r = utest_result(&planted, &tmp.path().join("a/out"), &[]);
    assert!(r["f"].as_f64().unwrap() > 0.6 && r["p"].as_f64().unwrap() < 0.01, "{r}");

    let null = synth(&tmp.path().join("b"), &["--items", "1000", "--seed", "1", "--coupling", "independent"]);
    let f = utest_result(&null, &tmp.path().join("b/out"), &[])["f"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&f), "{f}");
}

#[test]
fn grouping_tests_need_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = synth(tmp.path(), &["--items", "50", "--models", "6"]);
    for g in ["same_plm", "same_split", "param_diff"] {
        let r = utest_result(&bundle, &tmp.path().join(g), &["--grouping", g]);
        assert!(r["f"].as_f64().is_some());
    }
    let manifest = bundle.join("manifest.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    v["models"][0].as_object_mut().unwrap().remove("plm_family");
    fs::write(&manifest, v.to_string()).unwrap();
    let out = cplx(&["utest", "--bundle", s(&bundle), "--out", s(&tmp.path().join("x")), "--grouping", "same_plm"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing_metadata"));
}

#[test]
fn empty_partition_is_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = synth(tmp.path(), &["--items", "30"]);
    // No failure rate exceeds 1, so the fail group is empty.
    let out = cplx(&["utest", "--bundle", s(&bundle), "--out", s(&tmp.path().join("o")), "--threshold", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

fn snapshot(dir: &Path) -> HashMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn commands_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let b = s(&fixture()).to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["indicators", "--bundle", &b],
        vec!["correlate", "--bundle", &b, "--partition", "--r2"],
        vec!["utest", "--bundle", &b],
        vec!["utest", "--bundle", &b, "--grouping", "param_diff"],
        vec!["validate", "--bundle", &b],
    ];
    for (i, args) in runs.iter().enumerate() {
        let (d1, d2) = (tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b")));
        let with_out = |d: &Path| {
            let mut a = args.clone();
            a.extend(["--out", s(d)]);
            cplx(&a)
        };
        let first = with_out(&d1);
        let second = with_out(&d2);
        let first_files = snapshot(&d1);
        assert_eq!(first.stdout, second.stdout);
        assert_eq!(first_files, snapshot(&d2), "{args:?}");
    }
    let s1 = synth(&tmp.path().join("s1"), &["--seed", "3"]);
    let s2 = synth(&tmp.path().join("s2"), &["--seed", "3"]);
    assert_eq!(fs::read(s1.join("manifest.json")).unwrap(), fs::read(s2.join("manifest.json")).unwrap());
    assert_eq!(snapshot(&s1.join("layers")), snapshot(&s2.join("layers")));
}

fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn naive_spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn correlation_table_is_reproducible_from_the_indicator_table() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = synth(tmp.path(), &["--items", "300", "--annotators", "6", "--seed", "8"]);
    let out = tmp.path().join("out");
    assert_eq!(code(&cplx(&["indicators", "--bundle", s(&bundle), "--out", s(&out)])), 0);
    assert_eq!(code(&cplx(&["correlate", "--bundle", s(&bundle), "--out", s(&out)])), 0);
    let (header, rows) = read_csv(&out.join("indicators.csv"));
    let (_, cells) = read_csv(&out.join("correlations.csv"));
    let column = |name: &str| header.iter().position(|h| h == name).unwrap();
    for cell in cells.iter().filter(|c| c[0] == "model_vs_human") {
        let (ci, cj) = (column(&cell[1]), column(&cell[2]));
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| !r[ci].is_empty() && !r[cj].is_empty())
            .map(|r| (r[ci].parse::<f64>().unwrap(), r[cj].parse::<f64>().unwrap()))
            .unzip();
        let expected = naive_spearman(&x, &y);
        let got: f64 = cell[4].parse().unwrap();
        assert!((got - expected).abs() < 1e-9, "{} {}: {got} vs {expected}", cell[1], cell[2]);
        assert_eq!(cell[5].parse::<usize>().unwrap(), x.len());
    }
}
