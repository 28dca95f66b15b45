use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_coarse-switch");

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], env: &[(&str, &str)]) -> Outcome {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> Outcome {
    let o = run(args, &[]);
    assert_eq!(o.code, 0, "{args:?}\nstdout: {}\nstderr: {}", o.stdout, o.stderr);
    o
}

fn dir(root: &Path, name: &str) -> String {
    root.join(name).to_string_lossy().into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Data rows of a CSV file as floats (non-numeric cells become NaN).
fn read_csv(path: PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn stored_policy() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/policies/co-near-optimal.json").to_owned()
}

#[test]
fn no_bifurcation_has_a_three_branch_window_around_the_nominal_k() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "bif");
    ok(&["--preset", "no", "bifurcation", "--from", "0", "--to", "10", "--points", "201", "--out", &out]);
    let (header, rows) = read_csv(Path::new(&out).join("bifurcation.csv"));
    assert_eq!(header, ["k", "theta", "stability"]);
    let count_at = |k: f64| rows.iter().filter(|r| (r[0] - k).abs() < 1e-9).count();
    assert_eq!(count_at(4.5), 3);
    assert_eq!(count_at(1.0), 1);
    let three: Vec<f64> = rows.iter().map(|r| r[0]).filter(|&k| count_at(k) == 3).collect();
    let (lo, hi) = (three[0], *three.last().unwrap());
    assert!(lo < 4.5 && 4.5 < hi, "window [{lo}, {hi}]");
    assert!(Path::new(&out).join("manifest.json").exists());
}

#[test]
fn co_single_point_scan_matches_the_tabulated_states() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "bif");
    ok(&["--preset", "co", "bifurcation", "--from", "3.5", "--to", "3.5", "--points", "1", "--out", &out]);
    let (_, rows) = read_csv(Path::new(&out).join("bifurcation.csv"));
    let expected = [(0.13944, 0.63553), (0.67526, 0.11452), (0.97101, 0.00137)];
    assert_eq!(rows.len(), 3);
    for (r, (a, b)) in rows.iter().zip(expected) {
        assert!((r[1] - a).abs() <= 1e-4 && (r[2] - b).abs() <= 1e-4, "{r:?}");
    }
}

#[test]
fn empty_scan_range_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["--preset", "no", "bifurcation", "--from", "5", "--to", "1", "--out", &dir(t.path(), "b")], &[]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("range"), "{}", o.stderr);
}

#[test]
fn legacy_simulation_from_the_low_state_is_flat() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "sim");
    ok(&["--preset", "no", "simulate", "--sample-dt", "0.05", "--out", &out]);
    let (_, rows) = read_csv(Path::new(&out).join("simulate.csv"));
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| (r[2] - rows[0][2]).abs() <= 1e-4 && (r[2] - 0.3301).abs() < 1e-4));
}

#[test]
fn kmc_simulation_is_reproducible_and_optimal_policy_crosses_the_middle_state() {
    let t = tempfile::tempdir().unwrap();
    let opt = dir(t.path(), "opt");
    ok(&["--preset", "no", "optimize", "--out", &opt]);
    let policy = dir(t.path(), "opt/policy.json");
    let args = |out: &str| {
        vec![
            "--preset".to_owned(),
            "no".into(),
            "simulate".into(),
            "--mode".into(),
            "kmc".into(),
            "--policy".into(),
            policy.clone(),
            "--sample-dt".into(),
            "0.0039".into(),
            "--out".into(),
            out.to_owned(),
        ]
    };
    let (a, b) = (dir(t.path(), "a"), dir(t.path(), "b"));
    for out in [&a, &b] {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let text_a = std::fs::read(Path::new(&a).join("simulate.csv")).unwrap();
    assert_eq!(text_a, std::fs::read(Path::new(&b).join("simulate.csv")).unwrap());
    let (_, rows) = read_csv(Path::new(&a).join("simulate.csv"));
    let t_f = rows.last().unwrap()[0];
    let crossing = rows.iter().find(|r| r[2] > 0.6803).expect("crosses the middle state");
    assert!(crossing[0] < t_f);
}

#[test]
fn event_trace_is_written_in_kmc_mode() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "ev");
    let env = [("COARSE_SWITCH__STEPPER__ENSEMBLE__N_SITES", "400")];
    let o = run(&["--preset", "co", "simulate", "--mode", "kmc", "--t-end", "0.2", "--events", "--out", &out], &env);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let (header, rows) = read_csv(Path::new(&out).join("events.csv"));
    assert_eq!(header, ["t", "channel", "n_a", "n_b"]);
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
}

#[test]
fn zero_budget_returns_the_initial_policy() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "opt");
    ok(&["--preset", "no", "optimize", "--max-evals", "0", "--out", &out]);
    let policy = read_json(Path::new(&out).join("policy.json"));
    assert!(policy["values"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(4.5)));
    let s = read_json(Path::new(&out).join("summary.json"));
    assert_eq!(s["eval_count"], 1);
    assert_eq!(s["best_f"], s["initial_f"]);
}

#[test]
fn legacy_no_search_stays_below_the_reference_bound() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "opt");
    ok(&["--preset", "no", "optimize", "--out", &out]);
    let s = read_json(Path::new(&out).join("summary.json"));
    assert!(s["best_f"].as_f64().unwrap() <= 10.50, "{s}");
    let (header, _) = read_csv(Path::new(&out).join("evaluations.csv"));
    assert_eq!(header[..3], ["evaluation", "stage", "total"]);
    let trace = std::fs::read_to_string(Path::new(&out).join("trace.jsonl")).unwrap();
    assert!(trace.lines().count() > 1);
}

#[test]
fn refine_constant_policy_and_reject_non_divisors() {
    let t = tempfile::tempdir().unwrap();
    let constant = t.path().join("constant.json");
    std::fs::write(
        &constant,
        r#"{"mechanism": "co", "T": 0.5, "N": 10, "p_ss": 3.5, "values": [3.5,3.5,3.5,3.5,3.5,3.5,3.5,3.5,3.5,3.5]}"#,
    )
    .unwrap();
    let out = dir(t.path(), "ref");
    ok(&["--preset", "co", "refine", "--policy", constant.to_str().unwrap(), "--new-t", "0.1", "--out", &out]);
    let p = read_json(Path::new(&out).join("policy-refined.json"));
    assert_eq!(p["N"], 50);
    assert!(p["values"].as_array().unwrap().iter().all(|v| (v.as_f64().unwrap() - 3.5).abs() < 1e-12));
    let o = run(
        &["--preset", "co", "refine", "--policy", constant.to_str().unwrap(), "--new-t", "0.3", "--out", &out],
        &[],
    );
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("multiple"), "{}", o.stderr);
}

#[test]
fn legacy_multigrid_chain_has_four_stages() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "mg");
    let env = [(
        "COARSE_SWITCH__OPTIMIZER__MULTIGRID",
        r#"{"schedule": [0.5, 0.25, 0.1], "scale_shrink": 0.5, "second_pass": true}"#,
    )];
    let o = run(&["--preset", "co", "optimize", "--out", &out], &env);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let s = read_json(Path::new(&out).join("summary.json"));
    let stages = s["stages"].as_array().unwrap();
    let intervals: Vec<f64> = stages.iter().map(|x| x["interval"].as_f64().unwrap()).collect();
    assert_eq!(intervals, [0.5, 0.25, 0.1, 0.1]);
    assert_eq!(stages[3]["second_pass"], true);
    assert_eq!(read_json(Path::new(&out).join("policy-stage3.json"))["N"], 50);
    let bests: Vec<f64> = stages.iter().map(|x| x["best_f"].as_f64().unwrap()).collect();
    assert!(bests.windows(2).all(|w| w[1] <= w[0]), "{bests:?}");
}

#[test]
fn separatrix_outcomes() {
    let t = tempfile::tempdir().unwrap();
    let out = dir(t.path(), "sep");
    ok(&["--preset", "co", "separatrix", "--out", &out]);
    let (header, rows) = read_csv(Path::new(&out).join("separatrix.csv"));
    assert_eq!(header, ["index", "theta_a", "theta_b"]);
    let closest = rows
        .iter()
        .map(|r| (r[1] - 0.67526).hypot(r[2] - 0.11452))
        .fold(f64::INFINITY, f64::min);
    assert!(closest <= 1e-3, "{closest}");

    let o = run(&["--preset", "no", "separatrix", "--out", &out], &[]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("2-dimensional"), "{}", o.stderr);

    let o = run(
        &["--preset", "co", "separatrix", "--out", &out],
        &[("COARSE_SWITCH__MODEL__PARAMS__BETA", "1.0")],
    );
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("saddle"), "{}", o.stderr);
}

#[test]
fn evaluate_statistics() {
    let t = tempfile::tempdir().unwrap();
    let policy = stored_policy();
    let out = dir(t.path(), "ev");
    ok(&["--preset", "co", "evaluate", "--policy", &policy, "--repeats", "10", "--out", &out]);
    let s = read_json(Path::new(&out).join("evaluate.json"));
    assert_eq!(s["std"].as_f64(), Some(0.0));

    ok(&["--preset", "co", "evaluate", "--policy", &policy, "--repeats", "1", "--out", &out]);
    let s = read_json(Path::new(&out).join("evaluate.json"));
    assert!(s["std"].is_null());

    ok(&["--preset", "co-kmc", "evaluate", "--policy", &policy, "--repeats", "10", "--out", &out]);
    let s = read_json(Path::new(&out).join("evaluate.json"));
    let std = s["std"].as_f64().unwrap();
    assert!(std > 0.005 && std < 0.1, "{std}");
    let seeds = read_json(Path::new(&out).join("manifest.json"))["seeds"].clone();
    assert_eq!(seeds.as_object().unwrap().len(), 10);
}

#[test]
fn replay_reproduces_kmc_outputs_under_other_thread_counts() {
    let t = tempfile::tempdir().unwrap();
    let policy = stored_policy();
    let first = dir(t.path(), "first");
    let env = [("COARSE_SWITCH__STEPPER__ENSEMBLE__M_REPLICAS", "64")];
    let o = run(&["--threads", "1", "--preset", "co-kmc", "rollout", "--policy", &policy, "--out", &first], &env);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let second = dir(t.path(), "second");
    let manifest = dir(t.path(), "first/manifest.json");
    ok(&["--threads", "3", "replay", &manifest, "--out", &second]);
    for f in ["rollout.csv", "rollout-report.json"] {
        assert_eq!(
            std::fs::read(Path::new(&first).join(f)).unwrap(),
            std::fs::read(Path::new(&second).join(f)).unwrap(),
            "{f}"
        );
    }
    let m = read_json(Path::new(&second).join("manifest.json"));
    assert_eq!(m["config"]["stepper"]["ensemble"]["m_replicas"], 64);
    assert_eq!(m["charge_convention"]["label"], "interval-end");
}

#[test]
fn config_errors_carry_positions_and_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let bad = t.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"model\": {\"mechanism\": \"no\", \"params\": {\"alpha\": 1, \"gamma\": 0.01, \"k\": 4.5}},\n  \"policy\": {\"T\": 0.25, \"N\": 20},\n  \"stepper\": {\"kind\": \"legacy\", \"replicas\": 3}\n}\n").unwrap();
    let o = run(&["--config", bad.to_str().unwrap(), "rollout", "--out", &dir(t.path(), "x")], &[]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("replicas") && o.stderr.contains("line 4"), "{}", o.stderr);

    let o = run(&["rollout"], &[]);
    assert_eq!(o.code, 2);
    let o = run(&["--preset", "no", "optimize"], &[("COARSE_SWITCH__OPTIMIZER__ALGORITHM", "simulated-annealing")]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("hooke-jeeves"), "{}", o.stderr);
}

#[test]
fn seed_flag_changes_kmc_results_and_is_recorded() {
    let t = tempfile::tempdir().unwrap();
    let env = [("COARSE_SWITCH__STEPPER__ENSEMBLE__N_SITES", "900")];
    let mut files = Vec::new();
    for seed in ["1", "2"] {
        let out = dir(t.path(), seed);
        let o = run(&["--preset", "co", "simulate", "--mode", "kmc", "--seed", seed, "--out", &out], &env);
        assert_eq!(o.code, 0, "{}", o.stderr);
        assert_eq!(read_json(Path::new(&out).join("manifest.json"))["master_seed"], seed.parse::<u64>().unwrap());
        files.push(std::fs::read(Path::new(&out).join("simulate.csv")).unwrap());
    }
    assert_ne!(files[0], files[1]);
}

#[test]
fn published_schema_is_current() {
    let o = ok(&["schema"]);
    let shipped = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/run-config.schema.json")).unwrap();
    let a: Value = serde_json::from_str(&o.stdout).unwrap();
    let b: Value = serde_json::from_str(&shipped).unwrap();
    assert_eq!(a, b, "regenerate with `coarse-switch schema`");
}
