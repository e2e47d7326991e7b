use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
trials = 2

[data]
source = "synthetic"
n = 3000
seed = 7
groups = ["WM: race==White & sex==Male", "WF: race==White & sex==Female"]

[splits]
train = 0.6
validation = 0.1
test = 0.2
aux = 0.1
seed = 11

[[learners]]
name = "lr"
kind = "logistic_regression"
iterations = 100

[[learners]]
name = "const"
kind = "constant_mean"

[boost]
epsilon = 0.05

[attack]
kind = "label_change"
target = "zero"
modify_group = "WM"
levels = [0.0, 0.5]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multigroup")).args(args).output().unwrap()
}

fn setup(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn experiment_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&["experiment", "--config", &cfg, "--out", s(out), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with(r#"{"record":"manifest""#));
    // 2 trials x 2 learners x 2 levels x 2 variants
    assert_eq!(lines.len(), 1 + 16);
}

#[test]
fn seed_flag_changes_the_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let a = run(&["experiment", "--config", &cfg, "--seed", "1"]);
    let b = run(&["experiment", "--config", &cfg, "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn pipeline_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let p = |name: &str| dir.path().join(name);
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--n".into(), "500".into(), "--out".into(), s(&p("train.csv")).into()],
        vec!["synth".into(), "--n".into(), "200".into(), "--seed".into(), "9".into(), "--out".into(), s(&p("test.csv")).into()],
        vec!["attack".into(), "--data".into(), s(&p("train.csv")).into(), "--level".into(), "0.5".into(), "--out".into(), s(&p("corrupt.csv")).into()],
        vec!["fit".into(), "--data".into(), s(&p("corrupt.csv")).into(), "--out".into(), s(&p("base.csv")).into()],
        vec![
            "fit".into(), "--data".into(), s(&p("corrupt.csv")).into(), "--predict".into(), s(&p("test.csv")).into(),
            "--out".into(), s(&p("base_test.csv")).into(),
        ],
        vec![
            "boost".into(), "--data".into(), s(&p("corrupt.csv")).into(), "--base".into(), s(&p("base.csv")).into(),
            "--predict".into(), s(&p("test.csv")).into(), "--eval-base".into(), s(&p("base_test.csv")).into(),
            "--predictions".into(), s(&p("pp_test.csv")).into(), "--out".into(), s(&p("trace.jsonl")).into(),
        ],
        vec![
            "evaluate".into(), "--data".into(), s(&p("test.csv")).into(), "--predictions".into(), s(&p("pp_test.csv")).into(),
            "--out".into(), s(&p("report.jsonl")).into(),
        ],
    ];
    for step in steps {
        let mut args: Vec<&str> = step.iter().map(String::as_str).collect();
        args.extend(["--config", &cfg]);
        let o = run(&args);
        assert!(o.status.success(), "{step:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let report = fs::read_to_string(p("report.jsonl")).unwrap();
    let groups: Vec<serde_json::Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(groups.len(), 3);
    assert_eq!(groups[2]["group"], "ALL");
    assert_eq!(fs::read_to_string(p("pp_test.csv")).unwrap().lines().count(), 201);
}

#[test]
fn probe_prints_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let o = run(&["probe", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["accuracy_in_expectation"].as_array().unwrap().len(), 4);
    assert!(report["sample_size"]["required"].as_u64().unwrap() > 0);
}

#[test]
fn config_problems_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["experiment", "--config", s(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, CONFIG.replace("train = 0.6", "train = 0.9")).unwrap();
    assert_eq!(run(&["experiment", "--config", s(&bad)]).status.code(), Some(2));

    assert_eq!(run(&["experiment"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let o = run(&["fit", "--config", &cfg, "--data", s(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}
