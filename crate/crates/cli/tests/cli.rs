use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SAMPLE: &str = r#"{"n":7,"initial_center":0,"requests":[[4,3],[5,0],[6,5],[6,1]]}"#;

fn starembed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starembed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_row(csv: &str) -> Vec<String> {
    csv.lines().nth(1).unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn generate_rand_lb_embeds_metadata() {
    let out = starembed(&[
        "generate", "--dist", "rand-lb", "--n", "10", "--pairs", "300", "--p", "0.6667", "--seed", "7",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["requests"].as_array().unwrap().len(), 600);
    assert_eq!(v["meta"]["off_cost"], 900);
    assert_eq!(v["meta"]["pivots"].as_array().unwrap().len(), 300);
    assert_eq!(v["meta"]["patterns"][0], "P1");

    let again = starembed(&[
        "generate", "--dist", "rand-lb", "--n", "10", "--pairs", "300", "--p", "0.6667", "--seed", "7",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn generate_uniform_on_two_nodes() {
    let out = starembed(&["generate", "--dist", "uniform", "--n", "2", "--len", "5", "--seed", "1"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for r in v["requests"].as_array().unwrap() {
        let mut pair: Vec<u64> = r.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        pair.sort();
        assert_eq!(pair, [0, 1]);
    }
    assert_eq!(v["requests"].as_array().unwrap().len(), 5);
}

#[test]
fn opt_reports_canonical_solution() {
    let dir = tempfile::tempdir().unwrap();
    let sample = write(dir.path(), "sample.json", SAMPLE);
    let out = starembed(&["opt", "--input", &sample, "--oracle"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cost"], 6);
    assert_eq!(v["labels"], "EΓEΓ");
    assert_eq!(v["trajectory"], serde_json::json!([0, 0, 6, 6]));

    let empty = write(dir.path(), "empty.json", r#"{"n":3,"initial_center":0,"requests":[]}"#);
    let v: Value = serde_json::from_str(&stdout(&starembed(&["opt", "--input", &empty]))).unwrap();
    assert_eq!(v["cost"], 0);

    let single = write(
        dir.path(),
        "single.json",
        r#"{"n":3,"initial_center":0,"requests":[[0,2]]}"#,
    );
    let v: Value = serde_json::from_str(&stdout(&starembed(&["opt", "--input", &single]))).unwrap();
    assert_eq!(v["labels"], "Γ");
}

#[test]
fn simulate_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sample = write(dir.path(), "sample.json", SAMPLE);

    let det = stdout(&starembed(&[
        "simulate", "--policy", "det-pt", "--input", &sample, "--verify",
    ]));
    assert!(det.starts_with(
        "seq_id,policy,seed,cost_mean,cost_stderr,opt_cost,off_cost,ratio_vs_opt,ratio_vs_off,blocks,violations\n"
    ));
    let row = data_row(&det);
    assert_eq!(row[3], "7");
    assert_eq!(row[7].parse::<f64>().unwrap(), 7.0 / 6.0);

    let st = stdout(&starembed(&["simulate", "--policy", "static", "--input", &sample]));
    assert_eq!(data_row(&st)[3], "7");

    let args = [
        "simulate", "--policy", "rand-pt", "--runs", "1000", "--seed", "3", "--input", &sample,
    ];
    let a = starembed(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, starembed(&args).stdout);
}

#[test]
fn simulate_trace_dump() {
    let dir = tempfile::tempdir().unwrap();
    let sample = write(dir.path(), "sample.json", SAMPLE);
    let trace = dir.path().join("trace.json");
    let out = starembed(&[
        "simulate",
        "--policy",
        "det-pt",
        "--input",
        &sample,
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(trace).unwrap()).unwrap();
    assert_eq!(v["trace"]["ledger"]["total"], 7);
    assert_eq!(v["trace"]["behavior_history"].as_array().unwrap().len(), 4);
}

#[test]
fn experiments() {
    let adv = starembed(&[
        "experiment",
        "det-adversary",
        "--policy",
        "det-pt",
        "--len",
        "1000",
        "--seed",
        "2",
        "--verify",
    ]);
    assert!(adv.status.success());
    let row = data_row(&stdout(&adv));
    assert_eq!(row[3], "2000");
    let r: f64 = row[7].parse().unwrap();
    assert!((1.49..=1.5).contains(&r));

    let survey = [
        "experiment",
        "survey",
        "--dist",
        "uniform",
        "--n",
        "8",
        "--len",
        "60",
        "--sequences",
        "20",
        "--policy",
        "det-pt",
        "--seed",
        "4",
        "--verify",
    ];
    let out = starembed(&survey);
    assert!(out.status.success());
    let text = stdout(&out);
    let max = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(7).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max <= 1.5);
    assert_eq!(out.stdout, starembed(&survey).stdout);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("yao.csv");
    let yao = starembed(&[
        "experiment",
        "yao",
        "--pairs",
        "40",
        "--sequences",
        "5",
        "--runs",
        "10",
        "--seed",
        "5",
        "--sweep",
        "1/2,0.8",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(yao.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("aggregate,")).count(), 5);
    assert_eq!(text.lines().filter(|l| l.contains(",lower-bound,")).count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"n":3,"initial_center":0,"requests":[[1,1]]}"#,
    );
    let out = starembed(&["opt", "--input", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let sample = write(dir.path(), "sample.json", SAMPLE);
    assert_eq!(
        starembed(&["simulate", "--policy", "static", "--runs", "5", "--input", &sample])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        starembed(&["generate", "--dist", "rand-lb", "--n", "5", "--pairs", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        starembed(&["generate", "--dist", "uniform", "--n", "4"]).status.code(),
        Some(1)
    );
    assert_eq!(starembed(&["frobnicate"]).status.code(), Some(1));

    let long: Vec<String> = (0..20).map(|i| format!("[{},{}]", i % 9, i % 9 + 1)).collect();
    let big = write(
        dir.path(),
        "big.json",
        &format!(r#"{{"n":10,"initial_center":0,"requests":[{}]}}"#, long.join(",")),
    );
    assert_eq!(starembed(&["opt", "--input", &big, "--oracle"]).status.code(), Some(3));
}
