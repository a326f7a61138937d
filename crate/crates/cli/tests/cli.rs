use std::process::{Command, Output};

use serde_json::Value;

fn pinertia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinertia"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("{key} missing in {v}"))
}

#[test]
fn analyze_symmetric_channel() {
    for file in ["bsc.json", "bsc.csv"] {
        let v = json(&pinertia(&["analyze", "--input", &data(file)]));
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["command"], "analyze");
        assert!((v["lambdas"][0].as_f64().unwrap() - 0.64).abs() < 1e-12);
        assert!((num(&v, "chi_squared") - 0.64).abs() < 1e-12);
        assert!((num(&v, "max_correlation") - 0.8).abs() < 1e-12);
        assert!((num(&v, "bayes_error") - 0.1).abs() < 1e-12);
    }
}

#[test]
fn bound_from_input_is_below_bayes_error() {
    let v = json(&pinertia(&["bound", "--input", &data("bsc.json")]));
    let b = num(&v, "bound_clamped");
    assert!((0.0..=0.1 + 1e-9).contains(&b));
}

#[test]
fn uniform_chi_squared_bound() {
    let v = json(&pinertia(&[
        "bound",
        "--p",
        "0.25,0.25,0.25,0.25",
        "--measure",
        "chi2",
        "--theta",
        "1",
    ]));
    assert!((num(&v, "bound_clamped") - (0.75 - 3f64.sqrt() / 4.0)).abs() < 1e-12);
}

#[test]
fn fano_bound_for_uniform_binary() {
    let v = json(&pinertia(&[
        "bound",
        "--p",
        "0.5,0.5",
        "--measure",
        "mi",
        "--theta",
        "0.5",
    ]));
    assert!((num(&v, "bound_clamped") - 0.11).abs() < 1e-3);
}

#[test]
fn function_bound_clamps_negative_raw_value() {
    let v = json(&pinertia(&[
        "bound",
        "--p",
        "0.6,0.3,0.1",
        "--measure",
        "maxcorr",
        "--theta",
        "0.9",
        "--M",
        "2",
    ]));
    assert!(num(&v, "bound_raw") < 0.0);
    assert_eq!(num(&v, "bound_clamped"), 0.0);
}

#[test]
fn k_correlation_program_bound() {
    let v = json(&pinertia(&[
        "bound", "--p", "0.5,0.5", "--theta", "0.36", "--k", "1",
    ]));
    // binary uniform input: (1 - sqrt(theta)) / 2
    assert!((num(&v, "bound_clamped") - 0.2).abs() < 1e-4);
}

#[test]
fn sweep_writes_csv_grid() {
    let out = pinertia(&[
        "sweep",
        "--p",
        "0.5,0.5",
        "--measure",
        "maxcorr",
        "--param",
        "theta",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,bound_raw,bound_clamped,exact_if_available");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,0.5,0.5"));
    assert!(lines[3].starts_with("1,0,0"));
}

#[test]
fn text_and_csv_formats() {
    let text = pinertia(&["analyze", "--input", &data("bsc.json"), "--format", "text"]);
    assert!(String::from_utf8(text.stdout)
        .unwrap()
        .starts_with("schema_version: 1\ncommand: analyze\n"));
    let csv = pinertia(&["analyze", "--input", &data("bsc.json"), "--format", "csv"]);
    assert!(String::from_utf8(csv.stdout)
        .unwrap()
        .starts_with("key,value\nschema_version,1\n"));
}

#[test]
fn small_verification_passes() {
    let v = json(&pinertia(&["verify", "--seed", "3", "--instances", "50"]));
    assert_eq!(v["passed"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(
        pinertia(&["bound", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(
        pinertia(&["bound", "--p", "0.5,0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        pinertia(&["analyze", "--input", &data("missing.json")])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        pinertia(&[
            "bound",
            "--p",
            "0.7,0.7",
            "--measure",
            "mi",
            "--theta",
            "0.1"
        ])
        .status
        .code(),
        Some(3)
    );
}
