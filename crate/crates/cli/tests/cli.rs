use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nrm_core::assortment::assortment_fixture;
use nrm_core::instances::{from_json, tiny1, to_json};
use nrm_core::Instance;
use serde_json::Value;

fn nrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrm")).args(args).env_remove("NRM_SEED").output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, inst: &Instance) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, to_json(inst)).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lp_value(out: &Output) -> f64 {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(stdout(out).trim()).unwrap();
    assert_eq!(v["status"], "optimal");
    v["lp_value"].as_f64().unwrap()
}

#[test]
fn generate_prints_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("a.json");
    let out = nrm(&["generate", "--setting", "a", "--mu", "40", "--sigma", "10", "--seed", "7", "-o", s(&out_path)]);
    assert!(out.status.success());
    let line = stdout(&out);
    assert!(line.starts_with("T=53 m=8 n=40 |S|=41 L=2 capacities="), "{line}");
    let inst = nrm_core::instances::read_instance(&out_path).unwrap();
    assert_eq!(inst.horizon(), 53);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["parameters"]["seed"], 7);
    assert_eq!(manifest["output"], s(&out_path));
}

#[test]
fn generate_without_output_writes_instance_to_stdout() {
    let out = nrm(&["generate", "--setting", "random", "--seed", "3"]);
    assert!(out.status.success());
    let inst = from_json(&stdout(&out)).unwrap();
    assert_eq!(to_json(&inst), stdout(&out));
}

#[test]
fn generate_high_variance_from_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("hv.json");
    fs::write(
        &spec,
        r#"{"rho":[0.5,0.5],"lambdas":[[1.0],[1.0],[1.0]],
            "types":[{"reward":3.0,"consumes":[1]}],"resources":[{"name":"seat","capacity":1}]}"#,
    )
    .unwrap();
    let out = nrm(&["generate", "--setting", "hv", "--spec", s(&spec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let inst = from_json(&stdout(&out)).unwrap();
    assert_eq!(inst.num_states(), 2);
    assert_eq!(inst.arrival.state_type, vec![None, Some(0)]);
}

#[test]
fn seed_defaults_to_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_nrm"))
        .args(["generate", "--setting", "random"])
        .env("NRM_SEED", "11")
        .output()
        .unwrap();
    let explicit = nrm(&["generate", "--setting", "random", "--seed", "11"]);
    assert_eq!(with_env.stdout, explicit.stdout);
}

#[test]
fn upper_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    assert!((lp_value(&nrm(&["upper-bound", s(&tiny)])) - 7.0).abs() < 1e-9);
    assert!((lp_value(&nrm(&["upper-bound", s(&tiny), "--backend", "highs"])) - 7.0).abs() < 1e-9);

    let mut zero = tiny1();
    for ty in &mut zero.types {
        ty.reward = 0.0;
    }
    let zero = write(dir.path(), "zero.json", &zero);
    assert_eq!(lp_value(&nrm(&["upper-bound", s(&zero)])), 0.0);

    let fixture = write(dir.path(), "assort.json", &assortment_fixture(1));
    assert!((lp_value(&nrm(&["upper-bound", s(&fixture), "--assort"])) - 2.6).abs() < 1e-9);

    let lp_file = dir.path().join("tiny.lp");
    nrm(&["upper-bound", s(&tiny), "--export-lp", s(&lp_file)]);
    assert!(fs::read_to_string(lp_file).unwrap().starts_with("Minimize\n"));
}

fn sim(file: &Path, policy: &str) -> Value {
    let out = nrm(&["simulate", s(file), "--policy", policy, "--reps", "1000", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&stdout(&out)).unwrap()
}

#[test]
fn simulate_brackets_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    for (policy, exact) in [("bbp", 5.0), ("greedy", 3.5)] {
        let r = sim(&tiny, policy);
        let (lo, hi) = (r["ci_low"].as_f64().unwrap(), r["ci_high"].as_f64().unwrap());
        assert!(lo <= exact && exact <= hi, "{policy}: [{lo}, {hi}] misses {exact}");
        assert_eq!(r["k"], 1000);
    }
    let adp = sim(&tiny, "adp");
    assert!(adp["mean"].as_f64().unwrap() <= 7.0);
}

#[test]
fn simulate_trace_has_one_row_per_period() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    let trace = dir.path().join("trace.csv");
    let out = nrm(&["simulate", s(&tiny), "--reps", "3", "--trace", s(&trace)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().next(), Some("rep,t,state,sold,offered,capacity"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(dir.path().join("trace.csv.manifest.json").exists());
}

#[test]
fn assortment_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write(dir.path(), "assort.json", &assortment_fixture(1));
    let out = nrm(&["simulate", s(&fixture), "--assort", "--reps", "2000", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let (lo, hi) = (r["ci_low"].as_f64().unwrap(), r["ci_high"].as_f64().unwrap());
    assert!(lo <= 2.6 && 2.6 <= hi, "[{lo}, {hi}]");
    let bad = nrm(&["simulate", s(&fixture), "--assort", "--policy", "greedy"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_passes_and_corruption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    let out = nrm(&["verify", s(&tiny)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("PASS") && text.contains("ratio=0.714286 bound=1/2"), "{text}");

    let out = nrm(&["verify", "--random-corpus", "20", "--assort-corpus", "5", "--seed", "1"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).ends_with("25 instances, 0 failed\n"));

    let failures = dir.path().join("failures");
    let out = nrm(&["verify", s(&tiny), "--debug-corrupt-nu", "--failures-dir", s(&failures)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stdout(&out).contains("policy above its lower bound"));
    let dumped: Vec<_> = fs::read_dir(&failures).unwrap().collect();
    assert_eq!(dumped.len(), 1);
    let inst = nrm_core::instances::read_instance(&dumped[0].as_ref().unwrap().path()).unwrap();
    assert_eq!(inst, tiny1());
}

#[test]
fn bid_prices_golden() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    let out = nrm(&["bid-prices", s(&tiny)]);
    assert_eq!(stdout(&out), "{\"nu\":[[[3.0,5.0],[2.0,0.0]],[[5.0,0.0],[0.0,2.0]],[[0.0,0.0],[0.0,0.0]]]}\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    assert_eq!(nrm(&["simulate", s(&tiny), "--reps", "0"]).status.code(), Some(2));
    assert_eq!(nrm(&["upper-bound", "/nonexistent/instance.json"]).status.code(), Some(2));
    assert_eq!(nrm(&["upper-bound", s(&tiny), "--assort"]).status.code(), Some(2));
    assert_eq!(nrm(&["generate", "--setting", "a", "--sigma=-1"]).status.code(), Some(3));
    assert_eq!(nrm(&["generate", "--setting", "hv"]).status.code(), Some(2));
    assert_eq!(nrm(&["reproduce", "--table", "3"]).status.code(), Some(2));

    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{\"resources\": 1}").unwrap();
    assert_eq!(nrm(&["bid-prices", s(&garbled)]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write(dir.path(), "tiny.json", &tiny1());
    let runs: [&[&str]; 4] = [
        &["generate", "--setting", "b", "--mu", "30", "--sigma", "15", "--seed", "2"],
        &["upper-bound", s(&tiny)],
        &["simulate", s(&tiny), "--reps", "200", "--seed", "9"],
        &["verify", "--random-corpus", "5", "--seed", "4"],
    ];
    for args in runs {
        let (a, b) = (nrm(args), nrm(args));
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
