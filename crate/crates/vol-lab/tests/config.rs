use std::path::{Path, PathBuf};

use vol_lab::config::{ExperimentConfig, ModelParams};
use vol_lab::{ConfigError, ExperimentKind};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_toml(text, Path::new("inline.toml"))
}

const MINIMAL: &str = r#"
[experiment]
name = "level_sweep"

[model]
type = "sabr"
alpha = 0.5
rho = -0.3

[grid]
sigma0 = [0.1, 0.2]

[option]
kind = "asian"
maturities = [0.01]

[sim]
n_paths = 1000
seed = 3
"#;

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let again = parse(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn defaults_are_filled_in() {
    let cfg = parse(MINIMAL).unwrap();
    assert_eq!(cfg.kind(), ExperimentKind::LevelSweep);
    assert_eq!(cfg.option.spot, 10.0);
    assert_eq!(cfg.sim.n_steps, 50);
    assert!(cfg.sim.antithetic);
    assert!(cfg.output.emit_svg);
    assert_eq!(cfg.sigma0_grid(), Some(&[0.1, 0.2][..]));
    assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn parse_errors_carry_line_information() {
    let broken = MINIMAL.replace("n_paths = 1000", "n_paths = \"many\"");
    match parse(&broken) {
        Err(ConfigError::Parse { message, .. }) => assert!(message.contains("line"), "{message}"),
        other => panic!("expected parse error, got {other:?}"),
    }
    let unknown = MINIMAL.replace("seed = 3", "seed = 3\nspeed = 4");
    assert!(matches!(parse(&unknown), Err(ConfigError::Parse { .. })));
    let missing_seed = MINIMAL.replace("seed = 3", "");
    assert!(matches!(parse(&missing_seed), Err(ConfigError::Parse { .. })));
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        MINIMAL.replace("sigma0 = [0.1, 0.2]", "sigma0 = []"),
        MINIMAL.replace("maturities = [0.01]", "maturities = []"),
        MINIMAL.replace("maturities = [0.01]", "maturities = [-1.0]"),
        MINIMAL.replace("alpha = 0.5", ""),
        MINIMAL.replace("rho = -0.3", "rho = 1.5"),
        MINIMAL.replace("[grid]\nsigma0 = [0.1, 0.2]", ""),
        MINIMAL.replace("n_paths = 1000", "n_paths = 0"),
        MINIMAL.replace("name = \"level_sweep\"", "name = \"approx_error_table\""),
        MINIMAL.replace("name = \"level_sweep\"", "name = \"decomposition_check\""),
        format!("{MINIMAL}\n[sampling]\nsigma0_range = [0.8, 0.2]\nvolvol_range = [0.3, 1.5]\nrho_range = [-0.9, 0.9]\nn_draws = 10\n"),
    ];
    for (i, text) in cases.iter().enumerate() {
        assert!(
            matches!(parse(text), Err(ConfigError::Invalid(_))),
            "case {i} should be invalid: {:?}",
            parse(text)
        );
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = ExperimentConfig::load(Path::new("/nonexistent/config.toml")).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}

#[test]
fn overrides_reach_the_model() {
    let cfg = parse(MINIMAL).unwrap();
    let (model, rho) = cfg
        .model
        .build(
            10.0,
            ModelParams {
                sigma0: Some(0.7),
                vol_of_vol: Some(1.1),
                rho: Some(0.2),
            },
        )
        .unwrap();
    assert_eq!(model.sigma0(), 0.7);
    assert_eq!(model.vol_of_vol(), 1.1);
    assert_eq!(rho.value(), 0.2);
}

#[test]
fn local_vol_table_section() {
    let text = r#"
[experiment]
name = "skew_sweep"

[model]
type = "localvol"

[model.local_vol]
function = "table"
knots = [[9.0, 0.35], [10.0, 0.3], [11.0, 0.28]]

[grid]
sigma0 = [0.3]

[option]
kind = "both"
maturities = [0.01]

[sim]
n_paths = 1000
seed = 1
"#;
    let cfg = parse(text).unwrap();
    let (model, _) = cfg.model.build(10.0, ModelParams::default()).unwrap();
    assert!((model.sigma0() - 0.3).abs() < 1e-12);
    assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
}
