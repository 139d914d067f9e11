use std::path::Path;
use std::process::{Command, Output};

fn csphere(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csphere"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn round_sphere_passes_and_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = csphere(&["verify", "--scenario", "round", "--n", "3", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    for f in ["report.json", "series.json", "metadata.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["summary"]["failed"], 0);
    let suites: Vec<&str> = report["sections"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["suite"].as_str().unwrap())
        .collect();
    assert_eq!(
        suites,
        [
            "regularity",
            "spherical-mean",
            "truncation",
            "singular-set",
            "total-scalar"
        ]
    );
}

#[test]
fn failed_checks_exit_one_and_tolerances_override() {
    let out = csphere(&["verify", "--scenario", "collapse", "--suite", "regularity"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL regularity/volume-lower"));
    let relaxed = csphere(&[
        "verify",
        "--scenario",
        "collapse",
        "--suite",
        "regularity",
        "--tol",
        "volume-lower=10",
    ]);
    assert_eq!(code(&relaxed), 0, "{}", stdout(&relaxed));
}

#[test]
fn usage_and_contract_errors_exit_two() {
    for args in [
        vec!["verify", "--suite", "nope"],
        vec!["verify", "--scenario", "nope"],
        vec!["verify", "--tol", "missing-equals"],
        vec!["verify", "--n", "2"],
        vec!["verify", "--suite", "singular-set", "--scenario", "bubble"],
        vec![
            "verify",
            "--suite",
            "spherical-mean",
            "--scenario",
            "bubble",
            "--n",
            "5",
            "--target",
            "u",
        ],
        vec!["verify", "--h", "0.5"],
        vec!["frobnicate"],
    ] {
        let out = csphere(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn reports_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // 5000 Monte-Carlo samples are too few for the 1% volume check; only
    // reproducibility matters here.
    let codes: Vec<i32> = [&a, &b]
        .iter()
        .map(|d| {
            code(&csphere(&[
                "verify",
                "--scenario",
                "bubble",
                "--samples",
                "5000",
                "--seed",
                "3",
                "--out",
                path(d.path()),
            ]))
        })
        .collect();
    assert_eq!(codes[0], codes[1]);
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_file_selects_suite_and_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "suite = \"total-scalar\"\n\n[scenario]\nname = \"perturbation\"\nn = 3\nlength = 2\n",
    )
    .unwrap();
    let out = csphere(&["verify", "--config", path(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("total-scalar") && !text.contains("regularity"), "{text}");
}

#[test]
fn plots_from_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = csphere(&[
        "verify",
        "--scenario",
        "perturbation",
        "--suite",
        "singular-set",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let plots = tempfile::tempdir().unwrap();
    let out = csphere(&[
        "plot",
        "--input",
        path(dir.path()),
        "--kind",
        "convergence",
        "--out",
        path(plots.path()),
    ]);
    assert_eq!(code(&out), 0);
    let svg = std::fs::read_to_string(plots.path().join("convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&csphere(&["plot", "--input", path(empty.path())])), 2);
    let round = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&csphere(&[
            "verify",
            "--suite",
            "regularity",
            "--out",
            path(round.path())
        ])),
        0
    );
    let none = csphere(&["plot", "--input", path(round.path()), "--kind", "tau-scan"]);
    assert_eq!(code(&none), 2);
}

#[test]
fn scenario_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = csphere(&["scenario-dump", "--scenario", "bubble", "--lambda", "3"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("lambda = 3"), "{text}");
    let out = csphere(&[
        "scenario-dump",
        "--scenario",
        "round",
        "--resolution",
        "6",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let saved = std::fs::read_to_string(dir.path().join("scenario.toml")).unwrap();
    assert!(saved.contains("name = \"round\""));
    let mut rows = csv::Reader::from_path(dir.path().join("factors.csv")).unwrap();
    assert_eq!(
        rows.headers().unwrap().iter().collect::<Vec<_>>(),
        ["x1", "x2", "x3", "x4", "weight", "f1"]
    );
    assert_eq!(rows.records().count(), 2 * 6usize.pow(3));

    let json = csphere(&["scenario-dump", "--scenario", "spike", "--format", "json"]);
    let body: String = stdout(&json).lines().take_while(|l| !l.starts_with('#')).collect();
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["widths"].as_array().unwrap().len(), 5);
}

#[test]
fn constants_and_listing() {
    let out = csphere(&["constants", "--n", "3"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let omega = v["omega_n"].as_f64().unwrap();
    assert!((omega - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    let list = stdout(&csphere(&["list"]));
    for name in ["regularity", "singular-set", "bubble", "spike", "collapse"] {
        assert!(list.contains(name), "{name}");
    }
}
