//! End-to-end checks of the `ppox` binary: argument handling, file outputs,
//! and the warning and error paths the flags promise.

use std::path::PathBuf;
use std::process::{Command, Output};

fn ppox() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppox"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ppox-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Tiny-but-real training config so runs finish in well under a second.
fn tiny_train_args(out: &PathBuf) -> Vec<String> {
    [
        "train",
        "--env",
        "pendulum",
        "--algo",
        "ppo",
        "--seed",
        "3",
        "--steps",
        "200",
        "--steps-per-iteration",
        "200",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out".to_string(), out.display().to_string()])
    .collect()
}

#[test]
fn train_writes_metrics_config_and_checkpoint() {
    let dir = temp_dir("train");
    let out = ppox().args(tiny_train_args(&dir)).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), 2, "one header plus one row: {metrics}");
    assert!(lines[0].starts_with("iter,steps,ret_mean"));
    assert!(dir.join("config.json").exists());
    assert!(dir.join("checkpoint.json").exists());
    assert!(stdout_of(&out).contains("metrics:"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn eval_reports_mean_return_for_a_checkpoint() {
    let dir = temp_dir("eval");
    let out = ppox().args(tiny_train_args(&dir)).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let eval = ppox()
        .args([
            "eval",
            "--checkpoint",
            &dir.join("checkpoint.json").display().to_string(),
            "--episodes",
            "2",
        ])
        .output()
        .unwrap();
    assert!(eval.status.success(), "stderr: {}", stderr_of(&eval));
    assert!(stdout_of(&eval).contains("mean return over 2 episodes"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn plain_ppo_warns_when_intrinsic_coefficients_are_set() {
    let dir = temp_dir("warn");
    let mut args = tiny_train_args(&dir);
    args.extend(["--c1".to_string(), "0.3".to_string()]);
    let out = ppox().args(args).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("no effect with --algo ppo"),
        "missing warning: {}",
        stderr_of(&out)
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn unknown_environment_fails_before_training() {
    let dir = temp_dir("badenv");
    let out = ppox()
        .args([
            "train", "--env", "cartpole", "--algo", "ppo", "--seed", "0", "--steps", "200",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("unknown environment"));
    assert!(!dir.exists());
}

#[test]
fn unknown_algorithm_fails_before_training() {
    let out = ppox()
        .args([
            "train", "--env", "pendulum", "--algo", "sac", "--seed", "0", "--steps", "200",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("unknown algorithm"));
}

#[test]
fn config_file_feeds_train_and_flags_override_it() {
    let dir = temp_dir("cfgfile");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("run.json");
    std::fs::write(
        &config_path,
        r#"{
            "env": "pendulum",
            "algo": "ppo",
            "seed": 11,
            "total_env_steps": 99999,
            "steps_per_iteration": 200,
            "epochs": 3
        }"#,
    )
    .unwrap();
    let run_dir = dir.join("out");
    let out = ppox()
        .args([
            "train",
            "--config",
            &config_path.display().to_string(),
            "--steps",
            "200",
            "--out",
            &run_dir.display().to_string(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    // The flag beat the file's total_env_steps, so exactly one iteration ran.
    let snapshot = std::fs::read_to_string(run_dir.join("config.json")).unwrap();
    assert!(snapshot.contains("\"total_env_steps\": 200"));
    assert!(snapshot.contains("\"seed\": 11"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn sweep_runs_all_configs_and_writes_the_summary() {
    let dir = temp_dir("sweep");
    std::fs::create_dir_all(&dir).unwrap();
    let sweep_path = dir.join("sweep.json");
    std::fs::write(
        &sweep_path,
        r#"{
            "runs": [
                {"env": "pendulum", "algo": "ppo", "seed": 0,
                 "total_env_steps": 200, "steps_per_iteration": 200, "epochs": 2},
                {"env": "pendulum", "algo": "iem-ppo", "seed": 0,
                 "total_env_steps": 200, "steps_per_iteration": 200, "epochs": 2}
            ]
        }"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = ppox()
        .args([
            "sweep",
            "--config",
            &sweep_path.display().to_string(),
            "--out",
            &out_dir.display().to_string(),
            "--jobs",
            "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3, "header plus two groups: {summary}");
    assert!(lines[0].starts_with("env,algo,sigma_init"));
    assert!(summary.contains("iem-ppo"));
    // Each run got its own directory with metrics.
    assert!(out_dir.join("run00-pendulum-ppo-seed0/metrics.csv").exists());
    assert!(out_dir.join("run01-pendulum-iem-ppo-seed0/metrics.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}
