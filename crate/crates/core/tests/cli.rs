use std::path::Path;
use std::process::{Command, Output};

fn dfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_fit_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    let fit = dir.path().join("fit.json");
    assert!(dfl(&["simulate", "--n", "250", "--seed", "11", "--out", p(&data)]).status.success());
    let header = std::fs::read_to_string(&data).unwrap();
    assert_eq!(header.lines().next(), Some("s,a,r1,x1,x2"));
    assert_eq!(header.lines().count(), 251);

    let o = dfl(&["fit", "--data", p(&data), "--method", "DFL", "--seed", "3", "--out", p(&fit)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fitted: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert_eq!(fitted["method"], "DFL");

    // Evaluating on the training file refits the same models, so the
    // metrics reproduce the training scores.
    let eval = json(&dfl(&["evaluate", "--data", p(&data), "--policy", p(&fit)]));
    for key in ["delta1", "delta2", "value"] {
        assert_eq!(eval[key], fitted["train_scores"][key], "{key}");
    }
}

#[test]
fn fit_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    assert!(dfl(&["simulate", "--n", "150", "--out", p(&data)]).status.success());
    let a = stdout(&dfl(&["fit", "--data", p(&data), "--method", "ADVB", "--seed", "9"]));
    let b = stdout(&dfl(&["fit", "--data", p(&data), "--method", "ADVB", "--seed", "9"]));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn b2_demo_reports_recovered_rules() {
    let out = json(&dfl(&["b2-demo", "--json"]));
    assert_eq!(out["tchebyshev_recovered"], serde_json::json!(["pi1", "pi2", "pi3"]));
    assert_eq!(out["linear_recovered"], serde_json::json!(["pi1", "pi3"]));
    let text = stdout(&dfl(&["b2-demo"]));
    assert!(text.contains("linear scalarization recovers: pi1, pi3"));
}

#[test]
fn existence_table_and_json() {
    let text = stdout(&dfl(&["existence"]));
    assert!(text.contains("double-fair policy exists: false"));
    let report = json(&dfl(&["existence", "--json"]));
    assert_eq!(report["cells"].as_array().unwrap().len(), 2);
}

#[test]
fn report_writes_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = dfl(&[
        "report",
        "--scenario",
        "b2-demo",
        "--replications",
        "2",
        "--methods",
        "DFL,Optimal",
        "--output-dir",
        p(&out),
        "--seed",
        "5",
        "--workers",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "report.json", "scatter.svg", "radar.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["metadata"]["master_seed"], 5);
}

#[test]
fn report_reads_toml_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("o");
    std::fs::write(
        &cfg,
        format!(
            "scenario = \"simulation\"\nmethods = [\"Optimal\", \"VB1\"]\nreplications = 2\noutput_dir = {:?}\n\n[sim]\nn_train = 60\nn_test = 100\n\n[dfl.class_spec]\npool_size = 40\nrefine_budget = 10\n",
            p(&out)
        ),
    )
    .unwrap();
    let o = dfl(&["report", "--config", p(&cfg), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(!out.join("report.json").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(dfl(&["report", "--replications", "0"]).status.code(), Some(1));
    assert_eq!(dfl(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(dfl(&["fit", "--data", "/definitely/missing.csv"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "s,a,r1,x1\n0,1,0.5,1.0\n2,0,0.1,0.3\n").unwrap();
    assert_eq!(dfl(&["evaluate", "--data", p(&bad), "--policy", p(&bad)]).status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "replications = \"many\"\n").unwrap();
    assert_eq!(dfl(&["report", "--config", p(&cfg)]).status.code(), Some(1));
    assert!(dfl(&["--help"]).status.success());
}
