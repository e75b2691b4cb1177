//! Exit codes, wire formats and option precedence of the `rdp` binary.

use std::path::Path;
use std::process::{Command, Output};

fn rdp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rdp"));
    c.env_remove("RDP_SEED");
    c
}

fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const GAMMA_SPEC: &str = r#"{"terms":[{"coef":1.0,"family":{"gamma":{"k":2.0,"theta":0.5}}}]}"#;
const DEG_SPEC: &str = r#"{"terms":[{"coef":1.0,"family":{"degenerate":{"k0":1.0}}}]}"#;

#[test]
fn analyze_reports_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "deg.json", DEG_SPEC);
    let out = rdp().args(["analyze", "--spec"]).arg(&spec).output().unwrap();
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["privacy"]["eps_general"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["utility"]["usefulness"].as_f64().unwrap() - 0.6321205588).abs() < 1e-6);

    let spec = write(dir.path(), "gamma.json", GAMMA_SPEC);
    let out = rdp().args(["analyze", "--spec"]).arg(&spec).output().unwrap();
    let v = stdout_json(&out);
    assert!((v["privacy"]["eps_general"].as_f64().unwrap() - 1.216395).abs() < 1e-6);
    assert_eq!(v["privacy"]["necessary_condition_holds"], true);
}

#[test]
fn malformed_spec_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"terms":[{"coef":1.0,"family":{"gamma":{"k":-2.0,"theta":0.5}}}]}"#,
    );
    let out = rdp().args(["analyze", "--spec"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('k'), "stderr must name the field: {err}");

    let syntactically_bad = write(dir.path(), "nojson.json", "{not json");
    let out = rdp()
        .args(["analyze", "--spec"])
        .arg(&syntactically_bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_target_exits_3() {
    // gamma family cannot reach eps below (k_min+1)·ln(1+θ_min·Δq)
    // inside a box with raised floors
    let out = rdp()
        .args([
            "optimize",
            "--epsilon",
            "0.0000001",
            "--families",
            "gamma",
            "--restarts",
            "4",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_flag_values_exit_2() {
    // clap's own error path
    let out = rdp()
        .args(["verify", "--corpus", "--seed", "not-a-number"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = rdp()
        .args(["optimize", "--epsilon", "1", "--metric", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = rdp()
        .args(["sweep", "--eps-min", "-1", "--eps-max", "2", "--steps", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_single_spec_passes_and_underpowered_run_warns() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "deg.json", DEG_SPEC);
    let out = rdp()
        .args(["verify", "--spec"])
        .arg(&spec)
        .args(["--samples", "200000", "--seed", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v[0]["all_pass"], true);

    // sharp spec, small sample: flagged low-confidence but still exit 0
    let sharp = write(
        dir.path(),
        "sharp.json",
        r#"{"terms":[{"coef":1.0,"family":{"degenerate":{"k0":8.0}}}]}"#,
    );
    let out = rdp()
        .args(["verify", "--spec"])
        .arg(&sharp)
        .args(["--samples", "100000", "--seed", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("low-confidence"), "{err}");
    let v = stdout_json(&out);
    assert_eq!(v[0]["sampled"]["low_confidence"], true);
}

#[test]
fn run_count_query_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "name,age\na,30\nb,25\nc,41\n");
    let spec = write(dir.path(), "s.json", GAMMA_SPEC);
    let out = rdp()
        .args(["run", "--data"])
        .arg(&data)
        .args(["--column", "age", "--query", "count", "--epsilon", "1", "--seed", "3", "--spec"])
        .arg(&spec)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["eps_certified"].as_f64().unwrap() - 1.216395).abs() < 1e-6);
    assert!(v.get("true_value").is_none(), "true value must never be emitted");
    assert!(v["noisy_value"].is_number());

    // non-numeric cell is an input error
    let bad = write(dir.path(), "bad.csv", "age\n30\noops\n");
    let out = rdp()
        .args(["run", "--data"])
        .arg(&bad)
        .args(["--column", "age", "--query", "count", "--epsilon", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-numeric"));

    // sum and mean need a clip range
    let out = rdp()
        .args(["run", "--data"])
        .arg(&data)
        .args(["--column", "age", "--query", "sum", "--epsilon", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = rdp()
        .args(["run", "--data"])
        .arg(&data)
        .args([
            "--column", "age", "--query", "sum", "--clip", "0,50", "--epsilon", "1", "--seed",
            "3", "--spec",
        ])
        .arg(&spec)
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn sweep_header_and_monotone_columns() {
    let out = rdp()
        .args([
            "sweep",
            "--eps-min",
            "0.5",
            "--eps-max",
            "6",
            "--steps",
            "8",
            "--gamma",
            "0.25",
            "--families",
            "degenerate,gamma",
            "--restarts",
            "8",
            "--seed",
            "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eps,baseline_usefulness,optimized_usefulness,best_family_mix,necc_holds"
    );
    let mut last_base = 0.0;
    let mut last_opt = 0.0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let base: f64 = f[1].parse().unwrap();
        let opt: f64 = f[2].parse().unwrap();
        assert!(base >= last_base && opt >= last_opt, "columns must be non-decreasing");
        assert!(f[4] == "true" || f[4] == "false");
        last_base = base;
        last_opt = opt;
    }
}

#[test]
fn config_file_defaults_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "deg.json", DEG_SPEC);
    let config = write(dir.path(), "rdp.toml", "gamma = 2.0\nsensitivity = 1.0\n");

    // config value applies: usefulness at γ=2 is 1 - e^-2
    let out = rdp()
        .args(["--config"])
        .arg(&config)
        .args(["analyze", "--spec"])
        .arg(&spec)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["utility"]["usefulness"].as_f64().unwrap() - 0.8646647168).abs() < 1e-6);

    // explicit flag wins over the config
    let out = rdp()
        .args(["--config"])
        .arg(&config)
        .args(["analyze", "--spec"])
        .arg(&spec)
        .args(["--gamma", "1.0"])
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert!((v["utility"]["usefulness"].as_f64().unwrap() - 0.6321205588).abs() < 1e-6);

    // unknown keys are input errors
    let bad = write(dir.path(), "bad.toml", "gamme = 2.0\n");
    let out = rdp()
        .args(["--config"])
        .arg(&bad)
        .args(["analyze", "--spec"])
        .arg(&spec)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // JSON configs are accepted by extension
    let json_cfg = write(dir.path(), "rdp.json", r#"{"gamma": 2.0}"#);
    let out = rdp()
        .args(["--config"])
        .arg(&json_cfg)
        .args(["analyze", "--spec"])
        .arg(&spec)
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn verify_corpus_passes_end_to_end() {
    // moderate sample size: gates widen with the bootstrap stderr, so the
    // run must still pass cleanly and exit 0
    let out = rdp()
        .args(["verify", "--corpus", "--samples", "150000", "--seed", "12"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 10);
    for r in reports {
        assert_eq!(r["all_pass"], true, "{}", r["name"]);
    }
}

#[test]
fn rdp_seed_env_is_the_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "v\n1\n2\n");
    let spec = write(dir.path(), "s.json", GAMMA_SPEC);
    let base_args = |c: &mut Command| {
        c.args(["run", "--data"])
            .arg(&data)
            .args(["--column", "v", "--query", "count", "--epsilon", "1", "--spec"])
            .arg(&spec);
    };
    let mut via_env = rdp();
    base_args(&mut via_env);
    via_env.env("RDP_SEED", "99");
    let out_env = via_env.output().unwrap();
    assert!(out_env.status.success());

    let mut via_flag = rdp();
    base_args(&mut via_flag);
    via_flag.args(["--seed", "99"]);
    let out_flag = via_flag.output().unwrap();

    assert_eq!(out_env.stdout, out_flag.stdout);

    // explicit flag beats the environment
    let mut both = rdp();
    base_args(&mut both);
    both.env("RDP_SEED", "99").args(["--seed", "100"]);
    let out_both = both.output().unwrap();
    assert_ne!(out_both.stdout, out_flag.stdout);
}
