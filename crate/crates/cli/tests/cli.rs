//! End-to-end checks of the `ppwavelet` binary: outputs, determinism and
//! the exit-code contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ppwavelet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppwavelet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ppwavelet(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn fixture(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const CONSTANT: &str = r#"{"kind":"constant","rate":500}"#;

#[test]
fn simulate_writes_one_file_per_realization_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    ok(&["simulate", "--model", CONSTANT, "--m", "1", "--seed", "4", "--out", path(&out)]);
    assert!(out.join("realization_000.txt").exists());
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["m"], 1);
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["model"]["kind"], "constant");
}

#[test]
fn simulate_is_deterministic_and_substreams_differ() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "--model", CONSTANT, "--m", "3", "--seed", "9", "--out", path(&a)]);
    ok(&["simulate", "--model", CONSTANT, "--m", "3", "--seed", "9", "--out", path(&b)]);
    let files: Vec<String> = (0..3).map(|i| format!("realization_{i:03}.txt")).collect();
    let contents: Vec<String> = files.iter().map(|f| fs::read_to_string(a.join(f)).unwrap()).collect();
    for (f, c) in files.iter().zip(&contents) {
        assert_eq!(&fs::read_to_string(b.join(f)).unwrap(), c);
    }
    assert_ne!(contents[0], contents[1]);
    assert_ne!(contents[1], contents[2]);
}

#[test]
fn simulate_rejects_a_bad_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppwavelet(&["simulate", "--model", r#"{"kind":"constant","rate":-1}"#, "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn homogeneity_verdict_for_counts_three_and_one() {
    let dir = tempfile::tempdir().unwrap();
    let events = fixture(dir.path(), "e.txt", "# duration=1\n0.1\n0.2\n0.3\n0.6\n");
    let side = dir.path().join("side");
    let out = ok(&["test", "--events", &events, "--test", "homogeneity", "--level", "1", "--out", path(&side)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["test"], "homogeneity");
    assert_eq!(v["dof"], 1);
    assert!((v["R"].as_f64().unwrap() - 1.0465).abs() < 1e-4);
    assert!((v["p"].as_f64().unwrap() - 0.306).abs() < 1e-3);
    assert_eq!(v["reject"], false);
    assert_eq!(read_json(&side.join("config.json"))["level"], 1);
}

#[test]
fn exit_codes_separate_usage_parse_and_all_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let events = fixture(dir.path(), "e.txt", "# duration=1\n0.1\n0.7\n");
    let empty = fixture(dir.path(), "empty.txt", "# duration=1\n");
    let garbage = fixture(dir.path(), "bad.txt", "# duration=1\nnot-a-number\n");

    let vacuous = ppwavelet(&["test", "--events", &events, "--test", "homogeneity", "--level", "0"]);
    assert_eq!(vacuous.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&vacuous.stderr).contains("vacuous test"));

    let zero = ppwavelet(&["test", "--events", &empty, "--test", "innovation", "--level", "1"]);
    let parse = ppwavelet(&["test", "--events", &garbage, "--test", "innovation", "--level", "1"]);
    assert_eq!(zero.status.code(), Some(1));
    assert_eq!(parse.status.code(), Some(2));
    assert_ne!(zero.status.code(), parse.status.code());

    let unknown = ppwavelet(&["estimate", "--events", &events, "--strategy", "magic", "--out", path(dir.path())]);
    assert_eq!(unknown.status.code(), Some(2));
    let levels = ppwavelet(&["estimate", "--events", &events, "--j0", "5", "--J", "3", "--out", path(dir.path())]);
    assert_eq!(levels.status.code(), Some(2));
    let too_fine = ppwavelet(&["estimate", "--events", &events, "--J", "30", "--out", path(dir.path())]);
    assert_eq!(too_fine.status.code(), Some(2));
}

fn simulated(dir: &Path) -> Vec<String> {
    let sim = dir.join("sim");
    ok(&["simulate", "--model", r#"{"kind":"blocks","a0":3000}"#, "--m", "2", "--seed", "1", "--out", path(&sim)]);
    (0..2).map(|i| path(&sim.join(format!("realization_{i:03}.txt"))).to_string()).collect()
}

#[test]
fn linear_strategy_matches_the_bin_count_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let events = simulated(dir.path());
    let out = dir.path().join("est");
    let mut args = vec!["estimate", "--events"];
    args.extend(events.iter().map(String::as_str));
    args.extend(["--strategy", "linear", "--J", "4", "--j0", "2", "--grid", "64", "--out", path(&out)]);
    ok(&args);
    // Independent bin-count estimator at level J + 1 = 5 sampled on t_j = (j-1)/64.
    let series: Vec<Vec<f64>> = events
        .iter()
        .map(|p| {
            fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect()
        })
        .collect();
    let mut counts = [0u64; 32];
    for times in &series {
        for t in times {
            counts[((t * 32.0) as usize).min(31)] += 1;
        }
    }
    let csv = fs::read_to_string(out.join("reconstruction.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 64);
    for (t, v) in rows {
        let want = 32.0 / 2.0 * counts[(t * 32.0) as usize] as f64;
        assert!((v - want).abs() <= 1e-9 * want.max(1.0), "t = {t}: {v} vs {want}");
    }
    let config = read_json(&out.join("config.json"));
    assert_eq!(config["strategy"], "linear");
    assert_eq!(config["config"]["J"], 4);
}

#[test]
fn lrtg_invert_toggles_the_global_reading() {
    let dir = tempfile::tempdir().unwrap();
    let events = simulated(dir.path());
    let run = |name: &str, invert: bool| {
        let out = dir.path().join(name);
        let mut args = vec!["threshold", "--events"];
        args.extend(events.iter().map(String::as_str));
        args.extend(["--strategy", "lrt-global", "--out", path(&out)]);
        if invert {
            args.push("--lrtg-invert");
        }
        ok(&args);
        fs::read_to_string(out.join("mask.csv")).unwrap()
    };
    let literal = run("literal", false);
    let inverted = run("inverted", true);
    assert_ne!(literal, inverted);
    // Every coefficient flips: each level is either rejected or not.
    let flags = |csv: &str| csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap() == "1").collect::<Vec<_>>();
    assert!(flags(&literal).iter().zip(flags(&inverted)).all(|(a, b)| *a != b));
}

#[test]
fn d4_estimate_writes_a_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let events = simulated(dir.path());
    let out = dir.path().join("d4");
    let mut args = vec!["estimate", "--events"];
    args.extend(events.iter().map(String::as_str));
    args.extend([
        "--wavelet",
        "d4",
        "--strategy",
        "lrt-local",
        "--j0",
        "1",
        "--J",
        "3",
        "--grid",
        "100",
        "--out",
        path(&out),
    ]);
    ok(&args);
    assert_eq!(fs::read_to_string(out.join("reconstruction.csv")).unwrap().lines().count(), 101);
    let mut bad = args.clone();
    let idx = bad.iter().position(|a| *a == "lrt-local").unwrap();
    bad[idx] = "lrt-global";
    assert_eq!(ppwavelet(&bad).status.code(), Some(2));
}

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/scenarios/table1.json");

#[test]
fn bench_csv_is_identical_for_one_and_eight_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("j1"), dir.path().join("j8"));
    ok(&["bench", "--scenario", SCENARIO, "--n", "12", "--jobs", "1", "--out", path(&a)]);
    ok(&["bench", "--scenario", SCENARIO, "--n", "12", "--jobs", "8", "--out", path(&b)]);
    for f in ["table1_rrmise.csv", "table1_rmise_ci.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("table1_rrmise.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "header + 3 model rows");
    assert_eq!(lines[0], "model,status,Linear,DM-L,LRT-L,LRT-I,LRT-G,LRT-G*");
    assert!(lines[1..].iter().all(|l| l.split(',').nth(2) == Some("1.0000")));
    let report = read_json(&a.join("table1.json"));
    assert_eq!(report["n"], 12);
    assert!(report.get("git_revision").is_some());
    let config = read_json(&a.join("config.json"));
    assert_eq!(config["jobs"], 1);
    assert_eq!(config["n"], 12);
}

#[test]
fn bench_skips_rows_failing_the_mass_condition() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture(
        dir.path(),
        "s.json",
        r#"{"type":"rmise","name":"thin","models":[{"kind":"blocks","a0":500}],"j0":3,"J":7,"bootstrap":1000}"#,
    );
    let out = ppwavelet(&["bench", "--scenario", &scenario, "--n", "5", "--out", path(dir.path())]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("thin_rrmise.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("Blocks,skipped"));
}

#[test]
fn bench_runs_a_size_power_curve() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture(
        dir.path(),
        "c.json",
        r#"{"type":"size_power","name":"c","family":{"kind":"triangular","xi":0.1,"v":1},
            "tests":[{"test":"homogeneity","level":2}],"lambda0s":[1000,10000]}"#,
    );
    ok(&["bench", "--scenario", &scenario, "--n", "40", "--out", path(dir.path())]);
    let csv = fs::read_to_string(dir.path().join("c_curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("test,level,lambda0,rate,se,mass_ok"));
    assert_eq!(csv.lines().count(), 3);
}
