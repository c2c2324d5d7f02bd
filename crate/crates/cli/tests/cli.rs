use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use ndarray::Array2;
use varx_core::ingestion::{parse_weekly_csv, CsvSchema, CENSUS_REGIONS};
use varx_core::model::{Variant, VarxModel};

fn varx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varx"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = varx(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Synthetic inputs in `dir/data`.
fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", "data", "--seed", "4"];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

const INPUTS: [&str; 8] = [
    "--claims",
    "data/claims.csv",
    "--queries",
    "data/queries.csv",
    "--clicks",
    "data/clicks.csv",
    "--totals",
    "data/totals.csv",
];

fn with_inputs<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(INPUTS).collect()
}

/// Data rows of a CSV artifact, skipping the config comment.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config={"));
    lines.skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut all: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    all.sort();
    all
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(varx(d, &["--help"]).status.code(), Some(0));
    assert_eq!(varx(d, &["evaluate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(varx(d, &["forecast", "--horizon", "0"]).status.code(), Some(2));
    assert_eq!(varx(d, &["evaluate", "--variants", "A,E"]).status.code(), Some(2));
    assert_eq!(varx(d, &["evaluate", "--grid-ratio", "1.5"]).status.code(), Some(2));
    assert_eq!(varx(d, &["synth", "--out", "s", "--sparsity", "0"]).status.code(), Some(1));
    // nothing but the rejected synth's parent was touched
    assert!(!d.join("s").join("claims.csv").exists());
}

#[test]
fn missing_totals_names_the_file_and_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let out = varx(
        d,
        &[
            "evaluate", "--out", "run", "--claims", "data/claims.csv", "--queries", "data/queries.csv",
            "--clicks", "data/clicks.csv", "--totals", "data/absent.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("data/absent.csv"), "{}", stderr(&out));
    let leftovers = if d.join("run").exists() { listing(&d.join("run")) } else { vec![] };
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn exogenous_variants_need_all_three_signal_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let out = varx(d, &["evaluate", "--claims", "data/claims.csv", "--queries", "data/queries.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--totals"), "{}", stderr(&out));
    // the autoregressive variant alone needs only claims
    ok(d, &["evaluate", "--claims", "data/claims.csv", "--variants", "D", "--grid-size", "4"]);
    assert_eq!(rows(&d.join("out/report.csv")).len(), 9);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    fs::write(
        d.join("data/run.conf"),
        "# relative to this file\nclaims = claims.csv\nqueries = queries.csv\nclicks = clicks.csv\n\
         totals = totals.csv\nvariants = A,B\ngrid-size = 5\np = 3\n",
    )
    .unwrap();
    ok(d, &["cv", "--config", "data/run.conf", "--p", "1", "--out", "cv"]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("cv/cv.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["p"], 1);
    assert_eq!(json["config"]["grid_size"], 5);
    let log = rows(&d.join("cv/lambda_selection.csv"));
    assert_eq!(log.len(), 2 * 5);
    assert!(log.iter().all(|r| r[0] == "A" || r[0] == "B"));
    assert_eq!(log.iter().filter(|r| r[5] == "true").count(), 2);
}

#[test]
fn evaluate_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let out = ok(d, &with_inputs(&["evaluate", "--grid-size", "6", "--scale", "level"]));
    let printed = String::from_utf8_lossy(&out.stdout);
    let mut names: Vec<String> = listing(&d.join("out"))
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut expected = vec!["lambda_selection.csv".to_string(), "report.csv".into(), "report.json".into()];
    for v in ["A", "B", "C", "D"] {
        expected.push(format!("forecasts_{v}.csv"));
        expected.push(format!("model_{v}.json"));
    }
    expected.sort();
    assert_eq!(names, expected);
    assert_eq!(printed.lines().count(), expected.len());

    let report = rows(&d.join("out/report.csv"));
    let regions: Vec<&str> = report.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(regions, CENSUS_REGIONS.to_vec());
    for r in &report {
        assert!(r[1..].iter().all(|v| v.parse::<f64>().unwrap() > 0.0));
    }
    // one-step forecasts: the test third is 126 / 3 = 42 weeks after differencing
    assert_eq!(rows(&d.join("out/forecasts_C.csv")).len(), 42 * 9);
}

fn fit_model(d: &Path, extra: &[&str]) {
    let mut args = with_inputs(&["fit", "--out", "fit", "--grid-size", "5"]);
    args.extend_from_slice(extra);
    ok(d, &args);
}

#[test]
fn forecast_weeks_follow_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    fit_model(d, &["--variant", "B"]);
    ok(d, &with_inputs(&["forecast", "--model", "fit/model.json", "--horizon", "2", "--out", "fc"]));
    let out = rows(&d.join("fc/forecast.csv"));
    assert_eq!(out.len(), 18);

    let claims = parse_weekly_csv(fs::File::open(d.join("data/claims.csv")).unwrap(), &CsvSchema::default()).unwrap();
    let last = claims.index().week(claims.len() - 1);
    for (i, row) in out.iter().enumerate() {
        let step = i / 9 + 1;
        assert_eq!(row[2], step.to_string());
        let week: NaiveDate = row[0].parse().unwrap();
        assert_eq!(week, last + Duration::weeks(step as i64));
        assert_eq!(row[1], CENSUS_REGIONS[i % 9]);
        let diff: f64 = row[3].parse().unwrap();
        let level: f64 = row[4].parse().unwrap();
        assert!(diff.is_finite() && level.is_finite());
    }
}

#[test]
fn forecast_levels_add_last_years_value() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    fit_model(d, &["--variant", "D"]);
    // the autoregressive model needs claims only
    ok(d, &["forecast", "--model", "fit/model.json", "--claims", "data/claims.csv", "--horizon", "1", "--out", "fc"]);
    let out = rows(&d.join("fc/forecast.csv"));

    let states = parse_weekly_csv(fs::File::open(d.join("data/claims.csv")).unwrap(), &CsvSchema::default()).unwrap();
    let map = varx_core::ingestion::RegionMap::census_default();
    let regional = varx_core::ingestion::aggregate_to_regions(&states, &map).unwrap();
    let target: NaiveDate = out[0][0].parse().unwrap();
    let year_ago = regional.index().offset_of(target - Duration::weeks(52)).unwrap() as usize;
    for row in &out {
        let diff: f64 = row[3].parse().unwrap();
        let level: f64 = row[4].parse().unwrap();
        let base = regional.row(&row[1]).unwrap()[year_ago];
        assert!((level - (base + diff)).abs() <= 1e-9 * base.abs().max(1.0), "{row:?}");
    }
}

#[test]
fn sparsity_files_per_lag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    fit_model(d, &["--variant", "C", "--p", "2", "--s", "1"]);
    ok(d, &["sparsity", "--model", "fit/model.json", "--out", "sp", "--svg"]);
    assert!(d.join("sp/theta_lag1.csv").exists());
    assert!(d.join("sp/theta_lag2.csv").exists());
    assert!(d.join("sp/beta_lag1.csv").exists());
    assert!(!d.join("sp/theta_lag3.csv").exists());
    assert!(!d.join("sp/beta_lag2.csv").exists());
    assert!(fs::read_to_string(d.join("sp/sparsity.svg")).unwrap().starts_with("<"));
    let theta = rows(&d.join("sp/theta_lag1.csv"));
    assert_eq!(theta.len(), 9);
    assert_eq!(theta[0].len(), 10);
    assert_eq!(rows(&d.join("sp/beta_lag1.csv"))[0].len(), 19);
}

#[test]
fn zero_model_has_zero_magnitudes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let labels: Vec<String> = CENSUS_REGIONS.iter().map(|s| s.to_string()).collect();
    let model = VarxModel::from_coefficients(vec![Array2::zeros((9, 9))], vec![], labels, vec![], Variant::D).unwrap();
    fs::write(d.join("zero.json"), model.to_json(serde_json::Value::Null).unwrap()).unwrap();
    ok(d, &["sparsity", "--model", "zero.json", "--out", "sp"]);
    for row in rows(&d.join("sp/theta_lag1.csv")) {
        assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn corrupted_model_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), "{\"theta\": [").unwrap();
    for cmd in ["sparsity", "forecast"] {
        let out = varx(d, &[cmd, "--model", "bad.json", "--out", "x"]);
        assert_eq!(out.status.code(), Some(1));
        assert!(stderr(&out).contains("MissingModel"), "{}", stderr(&out));
    }
    let out = varx(d, &["sparsity", "--model", "nowhere.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("MissingModel"));
    assert!(!d.join("x").join("theta_lag1.csv").exists());
}

#[test]
fn synth_is_reproducible_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "a", "--seed", "9"]);
    ok(d, &["synth", "--out", "b", "--seed", "9"]);
    ok(d, &["synth", "--out", "c", "--seed", "10"]);
    for name in ["claims.csv", "queries.csv", "clicks.csv", "totals.csv", "truth.json"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap(), "{name}");
    }
    assert_ne!(fs::read(d.join("a/claims.csv")).unwrap(), fs::read(d.join("c/claims.csv")).unwrap());
}

#[test]
fn writes_stay_inside_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, &[]);
    let before = listing(d);
    ok(d, &with_inputs(&["evaluate", "--out", "run", "--grid-size", "4", "--variants", "D,A"]));
    let mut after = listing(d);
    after.retain(|p| !before.contains(p));
    assert_eq!(after, vec![d.join("run")]);
    assert_eq!(listing(&d.join("data")).len(), 5);
    // no staging directory is left behind
    assert!(listing(&d.join("run")).iter().all(|p| p.is_file()));
}
