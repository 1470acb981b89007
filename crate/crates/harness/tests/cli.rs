use std::path::Path;
use std::process::{Command, Output};

use mlz_core::specfun::FracOrder;
use mlz_harness::{ExperimentConfig, ExperimentKind};

fn mlz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlz")).args(args).output().expect("spawn mlz")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "mlz failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn small_bg_config(dir: &Path, name: &str) -> std::path::PathBuf {
    let nu = FracOrder::new(0.5).unwrap();
    let mut cfg = ExperimentConfig::bg(ExperimentKind::BgModel1, nu, &[0.2, 0.1], 400, 7).unwrap();
    cfg.shuffles = 20;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn ml_value_on_the_command_line() {
    let out = stdout(&mlz(&["specfun", "ml", "--nu", "0.5", "--x", "-1"]));
    let v: f64 = out.trim().parse().unwrap();
    // e * erfc(1)
    assert!((v - 0.427_583_576_155_807).abs() < 1e-12, "{v}");
}

#[test]
fn empty_suite_lists_available_suites() {
    let o = mlz(&["verify", "--suite", ""]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for s in ["specfun", "msd", "freeflight", "kinetics"] {
        assert!(err.contains(s), "{err}");
    }
}

#[test]
fn msd_suite_passes() {
    let out = stdout(&mlz(&["verify", "--suite", "msd"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["suite"], "msd");
    assert_eq!(v["passed"], true, "{out}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_bg_config(dir.path(), "cfg.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["sample_per_level"] = 10.into();
    std::fs::write(&path, v.to_string()).unwrap();
    let o = mlz(&["experiment", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sample_per_level"));
}

#[test]
fn inconsistent_scaling_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_bg_config(dir.path(), "cfg.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["schedule"][0][1] = 1.0.into();
    std::fs::write(&path, v.to_string()).unwrap();
    let o = mlz(&["experiment", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn experiment_outputs_are_reproducible_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bg_config(dir.path(), "cfg.json");
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    stdout(&mlz(&["experiment", "--config", cfg, "--threads", "1", "--out", a.to_str().unwrap()]));
    stdout(&mlz(&["experiment", "--config", cfg, "--threads", "3", "--out", b.to_str().unwrap()]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let side_a = std::fs::read_to_string(a.with_extension("json")).unwrap();
    let side_b = std::fs::read_to_string(b.with_extension("json")).unwrap();
    assert_eq!(side_a, side_b);

    let csv = std::fs::read_to_string(&a).unwrap();
    assert!(csv.starts_with("level,scale_a,scale_b,n,distance,p_value,"));
    assert_eq!(csv.lines().count(), 3);
    let side: serde_json::Value = serde_json::from_str(&side_a).unwrap();
    assert!(side["version"].as_str().unwrap().starts_with('v'));
    // the sidecar's config reloads to the one that was run
    let back: ExperimentConfig = serde_json::from_value(side["config"].clone()).unwrap();
    assert_eq!(back.samples_per_level, 400);
    assert_eq!(back.seed, 7);
}

#[test]
fn seed_flag_changes_and_fixes_samples() {
    let run = |seed: &str| stdout(&mlz(&["specfun", "lamperti", "--nu", "0.5", "--n", "50", "--seed", seed]));
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn output_may_not_overwrite_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bg_config(dir.path(), "run.json");
    let before = std::fs::read(&cfg).unwrap();
    let out = dir.path().join("run.csv");
    let o = mlz(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert_eq!(std::fs::read(&cfg).unwrap(), before);
}

#[test]
fn fractional_power_of_two_state_generator() {
    let out = stdout(&mlz(&["kinetics", "fractional-power", "--nu", "0.5", "--generator", "-1,1;1,-1"]));
    let vals: Vec<f64> = out.split([',', '\n']).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
    // eigenvalues 0 and -2 map to 0 and -sqrt(2)
    let h = std::f64::consts::SQRT_2 / 2.0;
    for (v, e) in vals.iter().zip([-h, h, h, -h]) {
        assert!((v - e).abs() < 1e-8, "{vals:?}");
    }
}
