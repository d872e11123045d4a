use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intentdag")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn compile_args<'a>(topology: &'a str, catalog: &'a str, src: &'a str, dst: &'a str, rate: &'a str) -> Vec<&'a str> {
    vec!["compile", "--topology", topology, "--catalog", catalog, "--src", src, "--dst", dst, "--rate", rate, "--compiler", "jml"]
}

/// Writes a two-seed campaign on the toy network into `dir`.
fn toy_config(dir: &Path, seeds: &str, dump: bool) -> PathBuf {
    let cfg = format!(
        r#"{{
  "topology": "{}",
  "catalog": "{}",
  "compilers": ["sap", "jml", "ldjml"],
  "seeds": {seeds},
  "demand": {{ "aggregate_gbps": 1500 }},
  "output_dir": "out",
  "dump_dag": {dump}
}}"#,
        data("toy-af.txt").display(),
        data("toy-catalog.json").display()
    );
    let path = dir.join("config.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn compile_fig2_scenario() {
    let (t, c, p) = (data("toy-af.txt"), data("toy-catalog.json"), data("toy-prior.csv"));
    let mut args = compile_args(t.to_str().unwrap(), c.to_str().unwrap(), "A", "F", "100");
    args.extend(["--prior", p.to_str().unwrap()]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "Installed");
    let created = v["created"].as_array().unwrap();
    let lp = created.iter().find(|c| c["kind"] == "Lightpath").unwrap();
    assert_eq!(lp["nodes"], serde_json::json!(["A", "C", "D", "F"]));
    let sp = created.iter().find(|c| c["kind"] == "Spectrum").unwrap();
    assert_eq!((sp["start"].as_u64(), sp["slots"].as_u64()), (Some(5), Some(5)));
    assert_eq!(v["prior"].as_array().unwrap().len(), 3);
}

#[test]
fn compile_unknown_node_is_usage_error() {
    let (t, c) = (data("toy-af.txt"), data("toy-catalog.json"));
    let o = run(&compile_args(t.to_str().unwrap(), c.to_str().unwrap(), "A", "Z", "100"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown node"));
}

#[test]
fn compile_infeasible_rate_is_blocked() {
    let (t, c) = (data("toy-af.txt"), data("toy-catalog.json"));
    let o = run(&compile_args(t.to_str().unwrap(), c.to_str().unwrap(), "A", "F", "100000"));
    assert_eq!(code(&o), 3);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "Blocked");
    assert!(v["reason"].is_string());
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["simulate", "--config", "/nonexistent/config.json"])), 2);
}

#[test]
fn empty_seed_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), "[]", false);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn simulate_is_deterministic_and_dumps_verify() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let cfg = toy_config(d.path(), "[1, 2]", true);
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["results.csv", "summary.json", "plot.csv", "dumps/jml_1_dag.json"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("out/results.csv")).unwrap();
    assert!(csv.starts_with("seed,compiler,src,dst,rate_gbps,status,latency_us,new_lightpaths,groomed_hops\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 30);

    let dumps = a.path().join("out/dumps");
    let (dag, state) = (dumps.join("jml_1_dag.json"), dumps.join("jml_1_state.json"));
    let o = run(&["verify", "--dag", dag.to_str().unwrap(), "--state", state.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(o.stdout.is_empty());

    // Occupy one free slot that no intent owns.
    let mut s: Value = serde_json::from_str(&std::fs::read_to_string(&state).unwrap()).unwrap();
    let mask = s["fibers"][0]["free"].as_str().unwrap().to_string();
    let i = mask.find('1').expect("a free slot");
    let mut flipped = mask.into_bytes();
    flipped[i] = b'0';
    s["fibers"][0]["free"] = Value::String(String::from_utf8(flipped).unwrap());
    let bad = dumps.join("flipped_state.json");
    std::fs::write(&bad, serde_json::to_string(&s).unwrap()).unwrap();
    let o = run(&["verify", "--dag", dag.to_str().unwrap(), "--state", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.contains("without owner"));

    let text = std::fs::read_to_string(&dag).unwrap();
    let cut = dumps.join("truncated_dag.json");
    std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
    let o = run(&["verify", "--dag", cut.to_str().unwrap(), "--state", state.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
