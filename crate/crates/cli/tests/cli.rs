use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn coinduct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coinduct")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no field {key:?} in {text:?}"))
}

#[test]
fn mc_analyze_symmetric_chain() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write(dir.path(), "chain.json", r#"{"matrix":[[0.5,0.5],[0.5,0.5]]}"#);
    let out = coinduct(&["mc", "analyze", &chain]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let u: Vec<f64> = field(&text, "stationary")
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((u[0] - 0.5).abs() < 1e-12 && (u[1] - 0.5).abs() < 1e-12);
    let mu0: f64 = field(&text, "mu_0").parse().unwrap();
    assert!((mu0 - 2.0).abs() < 1e-9);
}

#[test]
fn nwf_distance_numeral_one_vs_loop() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(
        dir.path(),
        "one.json",
        r#"{"nodes":[0,1],"children":{"0":[1],"1":[]},"root":0}"#,
    );
    let omega = write(dir.path(), "omega.json", r#"{"nodes":[0],"children":{"0":[0]},"root":0}"#);
    let out = coinduct(&["nwf", "distance", &one, &omega]);
    assert!(out.status.success());
    assert_eq!(field(&stdout_of(&out), "distance"), "2^-1");
}

#[test]
fn malformed_matrix_exits_2_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write(dir.path(), "bad.json", r#"{"matrix":[[0.5,0.6],[0.5,0.5]]}"#);
    let out = coinduct(&["mc", "analyze", &chain]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty(), "partial output on validation failure");
    assert!(!out.stderr.is_empty());
}

#[test]
fn unreadable_file_exits_2() {
    let out = coinduct(&["mc", "analyze", "/nonexistent/chain.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn periodic_chain_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write(dir.path(), "flip.json", r#"{"matrix":[[0,1],[1,0]]}"#);
    let out = coinduct(&["mc", "analyze", &chain]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn record_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write(
        dir.path(),
        "chain.json",
        r#"{"matrix":[[0.9,0.05,0.05],[0.1,0.8,0.1],[0.25,0.25,0.5]]}"#,
    );
    let first = coinduct(&["mc", "analyze", &chain, "--format", "record"]);
    let second = coinduct(&["mc", "analyze", &chain, "--format", "record"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(stdout_of(&first).starts_with("schema coinduct.mc.analyze.v1\n"));
}

#[test]
fn stream_merge_interleaves_generators() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"cycle":["a","b"]}"#);
    let b = write(dir.path(), "b.json", r#"{"cycle":["c","d"]}"#);
    let out = coinduct(&["stream", "merge", &a, &b, "--depth", "6"]);
    assert!(out.status.success());
    assert_eq!(field(&stdout_of(&out), "prefix"), "a c b d a c");
}

#[test]
fn stream_split_undoes_merge() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"cycle":["a","c","b","d"]}"#);
    let out = coinduct(&["stream", "split", &m, "--depth", "4"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert_eq!(field(&text, "even"), "a b a b");
    assert_eq!(field(&text, "odd"), "c d c d");
}

#[test]
fn stream_distance_reports_first_disagreement() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"cycle":["a","b","a","b"]}"#);
    let b = write(dir.path(), "b.json", r#"{"cycle":["a","b","a","c"]}"#);
    let out = coinduct(&["stream", "distance", &a, &b]);
    assert!(out.status.success());
    assert_eq!(field(&stdout_of(&out), "distance"), "2^-3");
}

const MDP_JSON: &str = r#"{
  "states": ["s0", "s1"],
  "actions": {"s0": ["stay", "go"], "s1": ["stay"]},
  "transitions": {
    "s0": {"stay": [["s0", 1.0]], "go": [["s1", 1.0]]},
    "s1": {"stay": [["s1", 1.0]]}
  },
  "rewards": {"s0": {"stay": 0.0, "go": 1.0}, "s1": {"stay": 2.0}},
  "discount": 0.5
}"#;

#[test]
fn mdp_solve_matches_hand_solution() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write(dir.path(), "mdp.json", MDP_JSON);
    let out = coinduct(&["mdp", "solve", &mdp]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    // v(s1) = 2/(1-0.5) = 4; v(s0) = max(0.5 v(s0), 1 + 0.5 v(s1)) = 3.
    let v: Vec<f64> = field(&text, "optimal_value")
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((v[0] - 3.0).abs() < 1e-8 && (v[1] - 4.0).abs() < 1e-8);
    assert_eq!(field(&text, "greedy_policy"), "s0=go s1=stay");
    let residual: f64 = field(&text, "oracle_residual").parse().unwrap();
    assert!(residual < 1e-7);
}

#[test]
fn mdp_derandomize_dominates_randomized_value() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write(dir.path(), "mdp.json", MDP_JSON);
    let mu = write(
        dir.path(),
        "mu.json",
        r#"{"dist":{"s0":{"stay":0.5,"go":0.5},"s1":{"stay":1.0}}}"#,
    );
    let out = coinduct(&["mdp", "derandomize", &mdp, &mu]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert_eq!(field(&text, "policy"), "s0=go s1=stay");
    let loss: f64 = field(&text, "max_value_loss").parse().unwrap();
    assert!(loss < 1e-7);
}

#[test]
fn nwf_approx_prints_tower() {
    let dir = tempfile::tempdir().unwrap();
    let omega = write(dir.path(), "omega.json", r#"{"nodes":[0],"children":{"0":[0]},"root":0}"#);
    let out = coinduct(&["nwf", "approx", &omega, "--depth", "3"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert_eq!(field(&text, "level_0"), "{}");
    assert_eq!(field(&text, "level_1"), "{{}}");
    assert_eq!(field(&text, "level_2"), "{{{}}}");
}

#[test]
fn nwf_bisim_detects_unfolded_loop() {
    let dir = tempfile::tempdir().unwrap();
    let omega = write(dir.path(), "omega.json", r#"{"nodes":[0],"children":{"0":[0]},"root":0}"#);
    let two_loop = write(
        dir.path(),
        "two.json",
        r#"{"nodes":[0,1],"children":{"0":[1],"1":[0]},"root":0}"#,
    );
    let out = coinduct(&["nwf", "bisim", &omega, &two_loop]);
    assert!(out.status.success());
    assert_eq!(field(&stdout_of(&out), "bisimilar"), "yes");
}

#[test]
fn dangling_child_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"nodes":[0],"children":{"0":[3]},"root":0}"#);
    let out = coinduct(&["nwf", "bisim", &bad, &bad]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_tolerance_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write(dir.path(), "chain.json", r#"{"matrix":[[1.0]]}"#);
    let out = coinduct(&["mc", "analyze", &chain, "--tol", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
