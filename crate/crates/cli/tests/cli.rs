use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerodiff")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn config_arg(name: &str) -> String {
    configs().join(name).display().to_string()
}

#[test]
fn spectrum_succeeds_and_writes_csv() {
    let cfg = config_arg("fig5a.toml");
    let out = run(&["spectrum", "--config", &cfg, "--modes", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# aerodiff spectrum"));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("axis,kind,index,lambda"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = config_arg("fig5c.toml");
    let a = run(&["point", "--config", &cfg]);
    let b = run(&["point", "--config", &cfg, "--threads", "1"]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_directory_receives_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_arg("fig5a.toml");
    let out = run(&["spectrum", "--config", &cfg, "--modes", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(written.contains("axis,kind,index"));
}

#[test]
fn modes_flag_changes_the_header_hash() {
    let cfg = config_arg("fig5a.toml");
    let a = String::from_utf8(run(&["spectrum", "--config", &cfg, "--modes", "5"]).stdout).unwrap();
    let b = String::from_utf8(run(&["spectrum", "--config", &cfg, "--modes", "6"]).stdout).unwrap();
    let hash = |s: &str| s.lines().find(|l| l.starts_with("# config_sha256")).unwrap().to_string();
    assert_ne!(hash(&a), hash(&b));
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(configs().join("fig5a.toml")).unwrap();
    std::fs::write(&path, format!("colour = \"blue\"\n{text}")).unwrap();
    let out = run(&["spectrum", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_inputs_are_validation_errors() {
    assert_eq!(code(&run(&["spectrum", "--config", "/nonexistent/scenario.toml"])), 1);
    assert_eq!(code(&run(&["spectrum"])), 1);
    assert_eq!(code(&run(&["bogus"])), 1);
    let cfg = config_arg("fig5a.toml");
    assert_eq!(code(&run(&["spectrum", "--config", &cfg, "--threads", "0"])), 1);
    assert_eq!(code(&run(&["spectrum", "--config", &cfg, "--tol", "-1"])), 1);
    assert_eq!(code(&run(&["sample", "--config", &cfg])), 1);
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("breath"));
}

#[test]
fn exhausted_quadrature_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.toml");
    let text = std::fs::read_to_string(configs().join("fig7_pmd_gamma.toml")).unwrap();
    let text = text.replace("[detection]", "[quadrature]\nabs_tol = 1e-300\nrel_tol = 1e-300\nmax_subdivisions = 1\n\n[detection]");
    std::fs::write(&path, text).unwrap();
    let out = run(&["sample", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_validation_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_arg("fig5a.toml");
    let out = run(&["validate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let oracle = std::fs::read_to_string(dir.path().join("validate_oracle.csv")).unwrap();
    assert!(oracle.contains("fdm_1d"));
    assert!(oracle.contains("false"));
}

#[test]
fn breath_accepts_each_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    let text = std::fs::read_to_string(configs().join("elevator_fig6.toml")).unwrap();
    std::fs::write(&path, text.replace("points = 50", "points = 3")).unwrap();
    for s in ["lower", "equal", "upper", "circular"] {
        let out = run(&["breath", "--surrogate", s, "--config", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{s}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&run(&["breath", "--surrogate", "oval", "--config", path.to_str().unwrap()])), 1);
}
