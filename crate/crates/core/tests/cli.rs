use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
[barrier]
a = 0.0
b = 1.0
height = 2.0

[packet]
x0 = -40.0
sigma = 7.0
k0 = 1.0

[run]
k_min = 0.2
k_max = 2.5
k_count = 40
times = [0.0, 40.0, 80.0]
field_points = 101
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qscatter"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn solve_writes_amplitudes_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), CONFIG, &["solve", "--oracle"]);
    assert_eq!(code, 0, "{err}");
    let csv = read(dir.path(), "amplitudes.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("k,re_a_t,im_a_t,re_a_r,im_a_r,t,r,unitarity_residual"));
    assert_eq!(lines.count(), 40);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "solve.json")).unwrap();
    assert_eq!(json["metadata"]["command"], "solve");
    assert_eq!(json["metadata"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(json["numerov_max_difference"].as_f64().unwrap() < 1e-6);
}

#[test]
fn outputs_are_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["solve", "decompose", "evolve"] {
        assert_eq!(run(a.path(), CONFIG, &[cmd, "--workers", "1"]).0, 0);
        assert_eq!(run(b.path(), CONFIG, &[cmd, "--workers", "4"]).0, 0);
    }
    for name in [
        "amplitudes.csv",
        "solve.json",
        "decomposition.csv",
        "decompose.json",
        "norms.csv",
        "evolve.json",
        "snapshots/snapshot_0001.csv",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn evolve_reports_norms_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), CONFIG, &["evolve"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(dir.path(), "norms.csv").lines().count(), 4);
    let snap = read(dir.path(), "snapshots/snapshot_0002.csv");
    assert_eq!(snap.lines().count(), 102);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "evolve.json")).unwrap();
    assert!(json["max_norm_drift"].as_f64().unwrap() < 1e-6);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), &CONFIG.replace("height", "heigth"), &["solve"]);
    assert_eq!(code, 2);
    assert!(err.contains("heigth"), "{err}");

    let (code, err) = run(dir.path(), &CONFIG.replace("sigma = 7.0", "sigma = -7.0"), &["evolve"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("sigma"), "{err}");

    let (code, _) = run(dir.path(), CONFIG, &["solve", "--workers", "0"]);
    assert_eq!(code, 2);

    let status = Command::new(env!("CARGO_BIN_EXE_qscatter")).arg("solve").output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    let status = Command::new(env!("CARGO_BIN_EXE_qscatter")).arg("--help").output().unwrap().status;
    assert_eq!(status.code(), Some(0));
}

#[test]
fn tolerance_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{CONFIG}\n[tolerances]\nunitarity = 1e-30\n");
    let (code, err) = run(dir.path(), &config, &["solve"]);
    assert_eq!(code, 3);
    assert!(err.contains("unitarity"), "{err}");
    // artifacts are still written for inspection
    assert!(dir.path().join("out/amplitudes.csv").exists());
}

#[test]
fn times_and_larmor_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), CONFIG, &["times"]).0, 0);
    let t: serde_json::Value = serde_json::from_str(&read(dir.path(), "times.json")).unwrap();
    assert!(t["tau_l_tr"]["residual_squared"].as_f64().unwrap() < 1e-3);
    assert_eq!(run(dir.path(), CONFIG, &["larmor"]).0, 0);
    let l: serde_json::Value = serde_json::from_str(&read(dir.path(), "larmor.json")).unwrap();
    assert!(l["tau_tr"]["value"].as_f64().unwrap() > 0.0);
    assert_eq!(l["comparison"]["agreement_tr"], false);
}
