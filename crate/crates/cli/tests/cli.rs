//! End-to-end tests of the `manifold-ae` binary: flag handling, exit codes,
//! artifact layout, and byte-level determinism, all on configs small enough
//! to keep each test under a second.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_manifold-ae")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small enough to train in well under a second, still end-to-end.
const TINY: &str = r#"{
  "sampling": { "n_per_component": 25, "seed": 5 },
  "architecture": { "encoder": [3, 8, 1], "decoder": [1, 8, 3] },
  "training": { "epochs": 20, "batch_size": 8, "seed": 5 },
  "analysis": { "sup_grid": 32, "refine_iters": 4 },
  "sweep": { "seeds": [1, 2] }
}"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).expect("config written");
    path
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&read(&dir.join("summary.json"))).expect("summary.json parses")
}

/// Blanks the only legitimately nondeterministic field in `summary.json`.
fn mask_duration(text: &str) -> String {
    let key = "\"duration_seconds\":";
    let Some(start) = text.find(key) else {
        return text.to_string();
    };
    let value_start = start + key.len();
    let value_len = text[value_start..]
        .find([',', '}'])
        .expect("number is followed by more JSON");
    format!("{}<D>{}", &text[..value_start], &text[value_start + value_len..])
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_flags_and_subcommands_are_usage_errors() {
    assert_eq!(code(&run(&["train", "--bogus"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("sample"));
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "sample",
        "--config",
        "/definitely/not/here.json",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("cannot read config"), "stderr: {}", stderr(&out));
}

#[test]
fn invalid_config_errors_name_the_json_path() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        // Semantic validation.
        (r#"{ "training": { "learning_rate": -1.0 } }"#, "training.learning_rate"),
        // Unknown key, with the section in the path.
        (r#"{ "sampling": { "n_points": 9 } }"#, "sampling"),
        // Duplicate key.
        (r#"{ "oracle": { "delta": 0.1, "delta": 0.2 } }"#, "duplicate"),
        // Mismatched bottleneck names both fields.
        (
            r#"{ "architecture": { "encoder": [3, 4, 2], "decoder": [1, 4, 3] } }"#,
            "architecture.encoder",
        ),
        // delta = 0 is rejected up front.
        (r#"{ "oracle": { "delta": 0.0 } }"#, "oracle.delta"),
    ];
    for (body, needle) in cases {
        let config = write_config(tmp.path(), body);
        let out = run(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 1, "config {body} should be rejected");
        assert!(
            stderr(&out).contains(needle),
            "stderr for {body} should mention {needle}, got: {}",
            stderr(&out)
        );
    }
}

#[test]
fn sample_writes_points_and_summary() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "sample",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let points = read(&out_dir.join("points.csv"));
    assert!(points.starts_with("component_id,param0,param1,x,y,z\n"));
    assert_eq!(points.lines().count(), 1 + 2 * 25, "header plus 25 points per circle");

    let s = summary(&out_dir);
    assert_eq!(s["schema_version"], "1");
    assert_eq!(s["command"], "sample");
    assert_eq!(s["results"]["n_points"], 50);
    assert_eq!(s["results"]["n_components"], 2);
    assert_eq!(s["csv_schemas"]["points.csv"], "component_id,param0,param1,x,y,z");
    assert_eq!(s["config_sha256"].as_str().map(str::len), Some(64));
}

#[test]
fn seed_flag_overrides_config_seeds() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    // TINY pins seed 5; --seed 9 must change the draw, and a config with
    // seed 9 must match the flag run exactly.
    let out = run(&["sample", "--config", config.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = run(&[
        "sample",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (pa, pb) = (read(&a.join("points.csv")), read(&b.join("points.csv")));
    assert_ne!(pa, pb, "--seed must override the config seed");

    let seeded = TINY.replace(r#""seed": 5"#, r#""seed": 9"#);
    let config9 = write_config(&tmp.path().join("a"), &seeded);
    let c = tmp.path().join("c");
    let out = run(&["sample", "--config", config9.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(read(&c.join("points.csv")), pb);
}

#[test]
fn out_config_field_is_used_when_flag_is_absent() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("from-config");
    let body = format!(
        r#"{{ "sampling": {{ "n_per_component": 5 }}, "out": "{}" }}"#,
        out_dir.display()
    );
    let config = write_config(tmp.path(), &body);
    let out = Command::new(bin())
        .args(["sample", "--config", config.to_str().unwrap()])
        .current_dir(tmp.path())
        .output()
        .expect("binary spawns");
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(out_dir.join("points.csv").exists());

    // The flag wins over the config field.
    let flag_dir = tmp.path().join("from-flag");
    let out = run(&[
        "sample",
        "--config",
        config.to_str().unwrap(),
        "--out",
        flag_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(flag_dir.join("points.csv").exists());
}

#[test]
fn unwritable_out_directory_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    // A regular file in the way makes the directory uncreatable.
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let out = run(&[
        "sample",
        "--out",
        blocker.join("nested").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("cannot create output directory"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn train_tiny_run_exits_2_and_writes_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    // 20 epochs of an 8-wide net cannot reach the convergence threshold.
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));

    for name in [
        "original.csv",
        "decoded.csv",
        "bottleneck.csv",
        "loss.csv",
        "model.json",
        "analysis.json",
        "decoded.svg",
        "bottleneck.svg",
        "summary.json",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }

    let s = summary(&out_dir);
    assert_eq!(s["command"], "train");
    assert_eq!(s["results"]["converged"], false);
    assert_eq!(s["results"]["n_points"], 50);
    assert_eq!(s["results"]["epochs"], 20);
    assert!(s["results"]["final_loss"].as_f64().unwrap() > 0.05);
    assert_eq!(
        s["csv_schemas"]["decoded.csv"],
        "component_id,x,y,z,x_hat,y_hat,z_hat,err"
    );
    assert_eq!(s["csv_schemas"]["bottleneck.csv"], "component_id,u");

    let loss = read(&out_dir.join("loss.csv"));
    assert_eq!(loss.lines().count(), 1 + 20, "header plus one loss per epoch");
    assert!(loss.starts_with("epoch,loss\n1,"));

    let decoded = read(&out_dir.join("decoded.csv"));
    assert_eq!(decoded.lines().count(), 1 + 50);
}

#[test]
fn train_then_analyze_reuses_the_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out_dir = tmp.path().join("out");
    assert_eq!(
        code(&run(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])),
        2
    );
    let out = run(&[
        "analyze",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    // A barely trained network has a large sup error, so the reach bound is
    // easily witnessed and the verdict passes.
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let s = summary(&out_dir);
    assert_eq!(s["command"], "analyze");
    assert_eq!(s["results"]["bound_satisfied"], true);
    assert!(s["results"]["model_path"].as_str().unwrap().ends_with("model.json"));
    assert!(out_dir.join("errors.csv").exists());
    let n = s["results"]["n_samples"].as_u64().unwrap();
    assert_eq!(n, 50);
}

#[test]
fn analyze_without_a_checkpoint_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out = run(&[
        "analyze",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("empty").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("cannot read model checkpoint"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn oracle_passes_its_invariants_and_reports_the_pinned_keys() {
    let tmp = TempDir::new().unwrap();
    // A protected point on the first circle must stay out of the bad set.
    let body = r#"{
      "sampling": { "n_per_component": 60, "seed": 3 },
      "oracle": { "delta": 0.05, "protected": [[1.0, 0.0, 0.0]] },
      "analysis": { "sup_grid": 256, "refine_iters": 8 }
    }"#;
    let config = write_config(tmp.path(), body);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "oracle",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let s = summary(&out_dir);
    assert_eq!(s["command"], "oracle");
    let r = &s["results"];
    assert_eq!(r["invariants_ok"], true);
    assert_eq!(r["badset_hits_protected"], 0);
    assert_eq!(r["n_protected"], 1);
    assert!(r["max_off_badset_error"].as_f64().unwrap() <= 1e-9);
    assert!(r["bad_set_measure"].as_f64().unwrap() < 0.05);
    assert!(r["mu_hat"].as_f64().unwrap() < 0.05);
    assert!(r["max_error_overall"].as_f64().unwrap() >= r["reach"].as_f64().unwrap());
    for name in ["oracle.json", "analysis.json", "errors.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn reproduce_circles_rejects_config_flag() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out = run(&[
        "reproduce-circles",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not accept --config"), "stderr: {}", stderr(&out));
}

#[test]
fn sweep_rejects_seed_flag() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--seed is not allowed"), "stderr: {}", stderr(&out));
}

#[test]
fn sweep_writes_member_dirs_and_aggregates() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    for seed in [1, 2] {
        let member = out_dir.join(format!("seed_{seed}"));
        assert!(member.join("summary.json").exists(), "member summary missing");
        assert!(member.join("model.json").exists(), "member model missing");
        let ms = summary(&member);
        assert_eq!(ms["command"], "train");
        assert_eq!(ms["results"]["sampling_seed"], seed);
        assert_eq!(ms["results"]["training_seed"], seed);
    }

    let sweep: Value = serde_json::from_str(&read(&out_dir.join("sweep.json"))).unwrap();
    assert_eq!(sweep["seeds"], serde_json::json!([1, 2]));
    let runs = sweep["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for run in runs {
        assert!(run["error"].is_null(), "member failed: {run}");
        assert!(run["final_loss"].is_f64());
    }

    let s = summary(&out_dir);
    assert_eq!(s["command"], "sweep");
    assert_eq!(s["results"]["n_runs"], 2);
    assert_eq!(s["results"]["n_errors"], 0);
    let best = s["results"]["best_seed"].as_u64().unwrap();
    assert!(best == 1 || best == 2);
}

#[test]
fn rerun_with_same_config_and_seed_is_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    }
    for name in [
        "original.csv",
        "decoded.csv",
        "bottleneck.csv",
        "loss.csv",
        "model.json",
        "analysis.json",
        "decoded.svg",
        "bottleneck.svg",
    ] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name} differs between reruns");
    }
    // summary.json matches except for the wall-clock duration.
    assert_eq!(
        mask_duration(&read(&a.join("summary.json"))),
        mask_duration(&read(&b.join("summary.json")))
    );
}
