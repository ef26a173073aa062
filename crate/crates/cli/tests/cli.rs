use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_importcast");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/imports_annual.csv")
}

fn importcast(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn importcast")
}

fn quick_run(out: &Path, countries: &str, extra: &[&str]) -> Output {
    let fixture = fixture();
    let mut args = vec![
        "run",
        "--input",
        fixture.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--countries",
        countries,
        "--epochs",
        "5",
    ];
    args.extend_from_slice(extra);
    importcast(&args)
}

#[test]
fn version_flag() {
    let out = importcast(&["--version"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("importcast {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn help_documents_defaults() {
    let out = importcast(&["run", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["lookback", "[16, 16, 16]", "paper-sigmoid", "2021q1", "200"] {
        assert!(text.contains(needle), "missing {needle} in help:\n{text}");
    }
}

#[test]
fn single_country_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("quarterly.csv");
    let out = quick_run(dir.path(), "IRN", &["--dump-quarterly", dump.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["metrics.csv", "forecast.csv", "trace.csv", "fit_train.csv", "fit_test.csv"] {
        assert!(dir.path().join("IRN").join(file).is_file(), "{file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["countries"][0]["country_code"], "IRN");
    assert_eq!(summary["countries"][0]["status"], "success");
    assert!(dir.path().join("summary.csv").is_file());

    let metrics = std::fs::read_to_string(dir.path().join("IRN/metrics.csv")).unwrap();
    assert!(metrics.starts_with("country,split,mse,mae,regression_coefficient,paper_mse,paper_mae\n"));
    assert!(metrics.lines().nth(1).unwrap().ends_with(",0.000538507,0.01618062"));
    assert_eq!(std::fs::read_to_string(dir.path().join("IRN/trace.csv")).unwrap().lines().count(), 6);

    let quarterly = std::fs::read_to_string(dump).unwrap();
    assert!(quarterly.starts_with("country,year,quarter,value\nIRN,1970,1,"));
    assert_eq!(quarterly.lines().count(), 201);
}

#[test]
fn unknown_country_fails_without_affecting_others() {
    let dir = tempfile::tempdir().unwrap();
    let out = quick_run(dir.path(), "XYZ,GRC", &[]);
    assert!(!out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let countries = summary["countries"].as_array().unwrap();
    assert_eq!(countries[0]["country_code"], "XYZ");
    assert_eq!(countries[0]["status"], "failed");
    assert_eq!(countries[0]["error"], "no such series");
    assert_eq!(countries[1]["status"], "success");
    assert!(dir.path().join("GRC/forecast.csv").is_file());
    assert!(!dir.path().join("XYZ").exists());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "input": fixture(),
            "countries": ["PRT"],
            "epochs": 3,
            "lookback": 6,
            "out_dir": dir.path().join("from-file"),
        })
        .to_string(),
    )
    .unwrap();
    let out_dir = dir.path().join("from-flag");
    let out = importcast(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--epochs",
        "2",
        "--disaggregation",
        "flat",
        "--candidate-mode",
        "standard-tanh",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("from-file").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["epochs"], 2);
    assert_eq!(summary["config"]["lookback"], 6);
    assert_eq!(summary["config"]["disaggregation"], "flat");
    assert_eq!(summary["config"]["candidate_mode"], "standard-tanh");
}

#[test]
fn config_typo_is_rejected_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(&config, serde_json::json!({ "input": fixture(), "lookbck": 4 }).to_string()).unwrap();
    let out = importcast(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown config key `lookbck`, did you mean `lookback`?"), "{err}");
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn gradcheck_passes() {
    let out = importcast(&["gradcheck"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().last().unwrap().starts_with("PASS"), "{text}");
}
