use std::path::Path;

use vol_lab::config::ExperimentConfig;
use vol_lab::experiments::{median_with_stderr, run_decomposition_check, run_level_sweep, run_skew_vs_maturity};
use vol_lab::plot::{emit_plot_data, PlotError, PlotStyle};
use vol_lab::{run, ResultTable};

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, Path::new("inline.toml")).unwrap()
}

fn level_config(model: &str) -> ExperimentConfig {
    parse(&format!(
        r#"
[experiment]
name = "level_sweep"

[model]
{model}

[grid]
sigma0 = [0.1, 0.5, 1.0]

[option]
kind = "both"
maturities = [0.004]

[sim]
n_paths = 20000
n_steps = 20
seed = 11
"#
    ))
}

fn csv_bytes(table: &ResultTable) -> Vec<u8> {
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    out
}

#[test]
fn constant_model_level_matches_sigma0() {
    let t = run_level_sweep(&level_config("type = \"constant\"")).unwrap();
    assert_eq!(t.len(), 6);
    let iv = t.column("iv_hat").unwrap();
    let se = t.column("stderr").unwrap();
    let theory = t.column("theory").unwrap();
    for i in 0..t.len() {
        assert!(se[i] > 0.0);
        assert!((iv[i] - theory[i]).abs() <= 3.0 * se[i], "row {i}: {} vs {}", iv[i], theory[i]);
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let cfg = level_config("type = \"sabr\"\nalpha = 0.5\nrho = -0.3");
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run(&cfg)).unwrap();
    let b = three.install(|| run(&cfg)).unwrap();
    let c = run(&cfg).unwrap();
    for ((ta, _), ((tb, _), (tc, _))) in a.tables.iter().zip(b.tables.iter().zip(&c.tables)) {
        assert_eq!(csv_bytes(ta), csv_bytes(tb));
        assert_eq!(csv_bytes(ta), csv_bytes(tc));
    }
    let dir = tempfile::tempdir().unwrap();
    let files_a = a.write(&dir.path().join("a"), false).unwrap();
    let files_c = c.write(&dir.path().join("c"), false).unwrap();
    for (fa, fc) in files_a.iter().zip(&files_c) {
        assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fc).unwrap());
    }
}

#[test]
fn csv_floats_round_trip_exactly() {
    let t = run_level_sweep(&level_config("type = \"constant\"")).unwrap();
    let text = String::from_utf8(csv_bytes(&t)).unwrap();
    let iv = t.column("iv_hat").unwrap();
    let col = t.column_index("iv_hat").unwrap();
    for (line, &x) in text.lines().skip(1).zip(&iv) {
        let field: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert_eq!(field.to_bits(), x.to_bits());
    }
}

#[test]
fn every_row_carries_a_stderr() {
    let out = run(&level_config("type = \"fbergomi\"\nv = 0.5\nhurst = 0.4\nrho = -0.3")).unwrap();
    let t = out.table("level_sweep").unwrap();
    assert!(t.column("stderr").unwrap().iter().all(|s| s.is_finite() && *s > 0.0));
}

#[test]
fn constant_model_has_no_skew_at_any_maturity() {
    let cfg = parse(
        r#"
[experiment]
name = "skew_vs_maturity"

[model]
type = "constant"
sigma0 = 0.3

[option]
kind = "both"
maturities = [0.001, 0.01, 0.1]

[sim]
n_paths = 20000
n_steps = 10
seed = 2
"#,
    );
    let (t, _) = run_skew_vs_maturity(&cfg).unwrap();
    let skew = t.column("skew_raw").unwrap();
    let se = t.column("skew_stderr").unwrap();
    for (s, e) in skew.iter().zip(&se) {
        assert!(s.abs() <= 3.0 * e + 1e-12, "{s} +- {e}");
    }
}

#[test]
fn decomposition_trivial_rows() {
    let cfg = parse(
        r#"
[experiment]
name = "decomposition_check"

[model]
type = "sabr"
sigma0 = 0.3
alpha = 0.5

[grid]
alpha = [0.0, 0.5]
rho = [0.0]

[option]
kind = "european"
maturities = [0.1]

[sim]
n_paths = 20000
n_steps = 10
seed = 4
"#,
    );
    let t = run_decomposition_check(&cfg).unwrap();
    assert_eq!(t.len(), 4);
    let alpha = t.column("alpha").unwrap();
    let corr = t.column("correction").unwrap();
    let corr_se = t.column("correction_stderr").unwrap();
    let lhs = t.column("lhs").unwrap();
    let rhs = t.column("rhs").unwrap();
    let pass = t.column("pass").unwrap();
    let closed = 0.3 * (0.1f64 / (2.0 * std::f64::consts::PI)).sqrt();
    for i in 0..t.len() {
        assert!(corr[i].abs() <= 3.0 * corr_se[i] + 1e-12, "row {i}");
        assert_eq!(pass[i], 1.0, "row {i}");
        if alpha[i] == 0.0 {
            assert!((rhs[i] - closed).abs() < 1e-12 * closed + 1e-15, "{} vs {closed}", rhs[i]);
            assert!((lhs[i] - closed).abs() < 0.02 * closed);
        }
    }
}

#[test]
fn plot_files_for_each_style() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = ResultTable::new("skew_vs_maturity", &["kind", "maturity", "skew_raw", "skew_stderr", "theory_raw"]);
    for (k, tm, s) in [("asian", 0.001, -0.1), ("asian", 0.01, -0.08), ("european", 0.001, -0.07)] {
        t.push(vec![k.into(), tm.into(), s.into(), 0.001.into(), (s * 1.1).into()]);
    }
    let files = emit_plot_data(&t, PlotStyle::SkewVsMaturity, dir.path(), true).unwrap();
    let names: Vec<String> = files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for want in ["skew_vs_maturity.csv", "skew_vs_maturity.dat", "skew_vs_maturity.svg", "skew_vs_maturity_loglog.svg"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    let svg = std::fs::read_to_string(dir.path().join("skew_vs_maturity.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    // a zero skew suppresses the log-log variant
    let dir2 = tempfile::tempdir().unwrap();
    t.push(vec!["european".into(), 0.01.into(), 0.0.into(), 0.001.into(), 0.0.into()]);
    let files = emit_plot_data(&t, PlotStyle::SkewVsMaturity, dir2.path(), true).unwrap();
    assert!(files.iter().all(|f| !f.to_string_lossy().ends_with("_loglog.svg")));
}

#[test]
fn empty_table_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let t = ResultTable::new("level_sweep", &["series", "sigma0", "iv_hat", "stderr", "theory"]);
    let err = emit_plot_data(&t, PlotStyle::LevelSweep, dir.path(), true).unwrap_err();
    assert!(matches!(err, PlotError::Empty(_)));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn median_stderr_shrinks_with_sample_size() {
    let mut small: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut large: Vec<f64> = (0..2500).map(|i| (i as f64 * 0.37).sin()).collect();
    let (_, s) = median_with_stderr(&mut small);
    let (_, l) = median_with_stderr(&mut large);
    assert!(l < s / 3.0, "{l} vs {s}");
}
