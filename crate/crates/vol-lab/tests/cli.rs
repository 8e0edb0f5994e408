use std::path::Path;
use std::process::Command;

fn vol_lab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vol-lab"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

const SMALL: &str = r#"
[experiment]
name = "level_sweep"

[model]
type = "constant"

[grid]
sigma0 = [0.2, 0.4]

[option]
kind = "both"
maturities = [0.01]

[sim]
n_paths = 2000
n_steps = 10
seed = 5

[output]
dir = "unused"
emit_svg = true
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_experiments_names_all_kinds() {
    let out = vol_lab().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["level_sweep", "skew_sweep", "skew_vs_maturity", "approx_error_table", "decomposition_check"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_writes_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("out");
    let status = vol_lab()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--seed", "9", "--paths", "1000", "--threads", "1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["level_sweep.csv", "level_sweep.dat", "level_sweep.svg"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out_dir.join("level_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &SMALL.replace("seed = 5", "seed = \"five\""));
    let status = vol_lab().arg("run").arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let invalid = write(dir.path(), "invalid.toml", &SMALL.replace("sigma0 = [0.2, 0.4]", "sigma0 = []"));
    let status = vol_lab().arg("run").arg(&invalid).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_failure() {
    let status = vol_lab().args(["run", "/nonexistent/vol-lab.toml"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_code_3() {
    // a subnormal volatility leaves every path at the strike, so the zero
    // Monte Carlo price has no implied volatility
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", &SMALL.replace("sigma0 = [0.2, 0.4]", "sigma0 = [1e-320]"));
    let out = vol_lab().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
