use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clb_core::{classify_regime, TwoBandSpectrum};
use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn clb(args: &[&str]) -> Output {
    clb_env(args, &[])
}

fn clb_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_clb"));
    cmd.args(args).env_remove("CLB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to run clb")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("stdout is not JSON")
}

/// Writes a modified copy of a bundled scenario.
fn edited(dir: &tempfile::TempDir, name: &str, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(scenario(name)).unwrap();
    assert!(text.contains(from), "{from} not in {name}");
    let path = dir.path().join(name);
    std::fs::write(&path, text.replace(from, to)).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn crlb_paper_example() {
    let out = clb(&["crlb", path_str(&scenario("paper_example.json"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc = json(&out);
    let rd = &doc["schemes"][0];
    assert_eq!(rd["scheme"], "rd");
    assert_eq!(rd["regime"], "IntermediateRate");
    assert_eq!(rd["water_level"].as_f64().unwrap(), 25.25);
    assert_eq!(rd["gains"]["high"].as_f64().unwrap(), 0.0);
    assert_eq!(rd["J_H"].as_f64().unwrap(), 0.0);
    let rc = doc["critical_rate"].as_f64().unwrap();
    assert!((rc / 11.33e6 - 1.0).abs() < 5e-3);
    let ratio = doc["crlb_ratio"].as_f64().unwrap();
    assert!((ratio / 9.97e-3 - 1.0).abs() < 1e-2);
    // Ratio of the reported bounds matches the reported ratio.
    let sel = &doc["schemes"][1];
    let b_rd = rd["crlb"][0][0].as_f64().unwrap();
    let b_sel = sel["crlb"][0][0].as_f64().unwrap();
    assert!((b_sel / b_rd / ratio - 1.0).abs() < 1e-12);
    assert_eq!(rd["identifiable"], true);
}

#[test]
fn crlb_overrides() {
    let base = json(&clb(&["crlb", path_str(&scenario("paper_example.json"))]));
    let out = clb(&["crlb", path_str(&scenario("paper_example.json")), "--rate", "10", "--T", "2e-3"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["observation_time"].as_f64().unwrap(), 2e-3);
    let a = base["schemes"][0]["crlb"][0][0].as_f64().unwrap();
    let b = doc["schemes"][0]["crlb"][0][0].as_f64().unwrap();
    assert!((a / b - 2.0).abs() < 1e-12);

    let out = clb(&["crlb", path_str(&scenario("paper_example.json")), "--rate", "20"]);
    assert_eq!(json(&out)["schemes"][0]["regime"], "HighRate");
    let out = clb(&["crlb", path_str(&scenario("paper_sweep.json")), "--rate", "20"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn zero_rate_reports_no_information() {
    let out = clb(&["crlb", path_str(&scenario("zero_rate.json"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rd = &json(&out)["schemes"][0];
    assert_eq!(rd["no_information"], true);
    assert_eq!(rd["regime"], "LowRate");
    assert!(rd["fim"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|x| x == 0.0));
    assert!(rd["crlb"][0][0].is_null());
}

#[test]
fn malformed_spectrum_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(&dir, "paper_example.json", "\"S_H\": 20", "\"S_H\": 100");
    let out = clb(&["crlb", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("spectrum.S_H"), "{}", stderr(&out));

    let bad = edited(&dir, "paper_example.json", "\"S_H\": 20", "\"S_H\": [20]");
    let out = clb(&["crlb", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("spectrum.S_H"), "{}", stderr(&out));

    let bad = edited(&dir, "paper_example.json", "\"speed\": 3e8", "\"speed\": -3e8");
    let out = clb(&["crlb", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("speed"));
}

#[test]
fn input_errors_exit_2() {
    let out = clb(&["crlb", "/nonexistent/scenario.json"]);
    assert_eq!(code(&out), 2);
    let out = clb(&["frobnicate"]);
    assert_eq!(code(&out), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(&dir, "paper_example.json", "\"scheme\": \"both\"", "\"scheme\": \"rd\"");
    let out = clb(&["compare", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("scheme"));
}

#[test]
fn domain_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(&dir, "paper_example.json", "\"source\": [300, 700]", "\"source\": [1000, 1000]");
    let out = clb(&["crlb", path_str(&bad)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    // 1 µs of data leaves too few DFT bins for the Monte-Carlo grid.
    let short = edited(&dir, "paper_example.json", "\"observation_time\": 1e-3", "\"observation_time\": 1e-6");
    let out = clb(&["validate", path_str(&short), "--mc", "100"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn compare_paper_row() {
    let out = clb(&["compare", path_str(&scenario("paper_example.json"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "rate,lambda_rd,lambda_sel,J_L_rd,J_H_rd,J_H_sel,crlb_ratio,regime");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0].parse::<f64>().unwrap(), 10e6);
    assert_eq!(row[1].parse::<f64>().unwrap(), 25.25);
    let ratio: f64 = row[6].parse().unwrap();
    assert!((ratio / 9.97e-3 - 1.0).abs() < 1e-2);
    assert_eq!(row[7], "IntermediateRate");
    assert!(lines.next().is_none());
}

#[test]
fn compare_matches_golden_file() {
    let out = clb(&["compare", path_str(&scenario("paper_sweep.json"))]);
    assert_eq!(code(&out), 0);
    let golden = include_str!("golden/paper_sweep_compare.csv");
    assert_eq!(stdout(&out), golden);
}

#[test]
fn compare_output_is_independent_of_thread_count() {
    let file = scenario("regime_crossing.json");
    let one = clb_env(&["compare", path_str(&file)], &[("CLB_THREADS", "1")]);
    let four = clb_env(&["compare", path_str(&file)], &[("CLB_THREADS", "4")]);
    assert_eq!(code(&one), 0);
    assert_eq!(stdout(&one), stdout(&four));
    let bad = clb_env(&["compare", path_str(&file)], &[("CLB_THREADS", "many")]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("CLB_THREADS"));
}

#[test]
fn regime_flips_once_across_critical_rate() {
    let out = clb(&["compare", path_str(&scenario("regime_crossing.json"))]);
    assert_eq!(code(&out), 0);
    let spectrum = TwoBandSpectrum::new(5e6, 200e6, 100.0, 20.0, 1.0).unwrap();
    let rows: Vec<(f64, String)> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].parse().unwrap(), cells[7].to_string())
        })
        .collect();
    assert_eq!(rows.len(), 57);
    for (rate, regime) in &rows {
        assert_eq!(regime, classify_regime(&spectrum, *rate).unwrap().as_str());
    }
    let flips = rows.windows(2).filter(|w| w[0].1 != w[1].1).count();
    assert_eq!(flips, 1);
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(&dir, "paper_sweep.json", "\"points\": 9", "\"points\": 0");
    let out = clb(&["compare", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("rate_sweep.points"));
}

#[test]
fn sweep_writes_one_row_per_rate_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = clb(&["sweep", path_str(&scenario("paper_sweep.json")), "--out", path_str(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rate,scheme,regime,lambda,gain_low,gain_high,J_L,J_H,fim_trace,crlb_trace,rmse_bound"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().step_by(2).all(|r| r[1] == "rd"));
    assert!(rows.iter().skip(1).step_by(2).all(|r| r[1] == "selective"));

    let out = clb(&["sweep", path_str(&scenario("three_band_psd.json")), "--out", path_str(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rmse: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(rmse.len(), 6);
    assert!(rmse.windows(2).all(|w| w[1] < w[0]), "bound must shrink with rate: {rmse:?}");
}

#[test]
fn validate_quadrature_only_passes() {
    let out = clb(&["validate", path_str(&scenario("paper_example.json"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["pass"], true);
    for c in doc["checks"].as_array().unwrap() {
        assert!(c["max_rel_error"].as_f64().unwrap() < 1e-8);
    }
    let out = clb(&["validate", path_str(&scenario("three_band_psd.json")), "--quadrature", "32"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn validate_monte_carlo_passes() {
    let out = clb(&["validate", path_str(&scenario("paper_example.json")), "--mc", "20000", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc = json(&out);
    let mc: Vec<&Value> = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["comparison"] == "analytic_vs_monte_carlo")
        .collect();
    assert_eq!(mc.len(), 2);
    assert!(mc.iter().all(|c| c["max_rel_error"].as_f64().unwrap() < 0.05));
}

#[test]
fn corrupted_weight_fails_validation() {
    let out = clb(&["validate", path_str(&scenario("paper_example.json")), "--corrupt-weight", "1.001"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("analytic_vs_quadrature"), "{}", stderr(&out));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn report_round_trips_inputs_in_si_units() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["paper_example.json", "three_band_psd.json"] {
        let args: Vec<&str> = match name {
            "three_band_psd.json" => vec!["--rate", "50"],
            _ => vec![],
        };
        let original = scenario(name);
        let mut first_args = vec!["crlb", path_str(&original)];
        first_args.extend(&args);
        let first = clb(&first_args);
        assert_eq!(code(&first), 0, "{}", stderr(&first));
        let doc = json(&first);
        let echoed = &doc["scenario"];
        assert_eq!(echoed["units"]["freq"], "Hz");
        assert_eq!(echoed["units"]["rate"], "bps");

        let path = dir.path().join(format!("echo_{name}"));
        std::fs::write(&path, serde_json::to_string(echoed).unwrap()).unwrap();
        let second = clb(&["crlb", path_str(&path)]);
        assert_eq!(code(&second), 0, "{}", stderr(&second));
        assert_eq!(json(&second), doc);
    }
    let doc = json(&clb(&["crlb", path_str(&scenario("paper_example.json"))]));
    assert_eq!(doc["scenario"]["spectrum"]["f_L"].as_f64().unwrap(), 5e6);
    assert_eq!(doc["scenario"]["spectrum"]["f_H"].as_f64().unwrap(), 200e6);
    assert_eq!(doc["scenario"]["rate"].as_f64().unwrap(), 10e6);
}
