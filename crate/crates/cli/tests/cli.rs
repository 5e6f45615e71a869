use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resilient-opt"))
}

fn smoke_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.args(["simulate", "--config"])
        .arg(smoke_config())
        .args(["--seed", "11", "--out"])
        .arg(out)
        .args(extra);
    cmd.output().unwrap()
}

#[test]
fn simulate_writes_csvs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = simulate(&a, &["--gnuplot"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(simulate(&b, &["--sequential"]).status.success());
    for name in ["experiment.csv", "bounds.csv", "distance.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    assert!(a.join("ratio.gp").exists());
    let text = std::fs::read_to_string(a.join("experiment.csv")).unwrap();
    assert!(
        text.starts_with("t,algorithm,mean_err,mean_err_ratio,mean_sq_err,stderr_sq,bound_thm1,")
    );
    // Every exported ratio at t = 0 is exactly one.
    for line in text.lines().skip(1).filter(|l| l.starts_with("0,")) {
        assert_eq!(line.split(',').nth(3), Some("1.0000000000000000e0"));
    }
}

#[test]
fn algorithm_and_realization_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        dir.path(),
        &["--algorithms", "nominal,wmsr", "--realizations", "2"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("experiment.csv")).unwrap();
    assert!(!text.contains(",resilient,"));
    assert!(text.contains(",nominal,") && text.contains(",wmsr,"));
    let bad = simulate(dir.path(), &["--algorithms", "gossip"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bounds_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["bounds", "--config"])
        .arg(smoke_config())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(text.starts_with("t,name,value\n"));
    for name in [
        "bound_thm1",
        "bound_cor5a",
        "bound_cor5b",
        "bound_cor5c",
        "bound_thm9",
        "delta_m",
    ] {
        assert!(text.contains(&format!(",{name},")), "{name}");
    }
}

#[test]
fn check_passes_on_smoke_config() {
    let out = bin()
        .args(["check", "--quick", "--config"])
        .arg(smoke_config())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("0 failed"));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin()
        .args(["check", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let text = std::fs::read_to_string(smoke_config())
        .unwrap()
        .replace("high = [50.0]", "high = [80.0]");
    let cfg = dir.path().join("outside.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bin()
        .args(["simulate", "--seed", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the constraint set"));
}
