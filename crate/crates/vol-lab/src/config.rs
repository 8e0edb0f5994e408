//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use bachelier_sv::bachelier::OptionKind;
use bachelier_sv::mc::SimConfig;
use bachelier_sv::models::{Correlation, LocalVolFn, VolModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LevelSweep,
    SkewSweep,
    SkewVsMaturity,
    ApproxErrorTable,
    DecompositionCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::LevelSweep,
        ExperimentKind::SkewSweep,
        ExperimentKind::SkewVsMaturity,
        ExperimentKind::ApproxErrorTable,
        ExperimentKind::DecompositionCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LevelSweep => "level_sweep",
            ExperimentKind::SkewSweep => "skew_sweep",
            ExperimentKind::SkewVsMaturity => "skew_vs_maturity",
            ExperimentKind::ApproxErrorTable => "approx_error_table",
            ExperimentKind::DecompositionCheck => "decomposition_check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::LevelSweep => "Monte Carlo ATM implied volatility against its short-maturity limit over a sigma0 grid",
            ExperimentKind::SkewSweep => "digital Monte Carlo ATM skew against the closed-form limit over a sigma0 grid",
            ExperimentKind::SkewVsMaturity => "ATM skew as a function of maturity with a fitted power law",
            ExperimentKind::ApproxErrorTable => "median errors of the linear implied-volatility approximation over random parameters",
            ExperimentKind::DecompositionCheck => "both sides of the SABR European decomposition formula at two grid resolutions",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Constant,
    Sabr,
    Fbergomi,
    Localvol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "type")]
    pub kind: ModelType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_vol: Option<LocalVolSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "lowercase", deny_unknown_fields)]
pub enum LocalVolSection {
    /// `base + amplitude * tanh((x - center) / width)`
    Tanh {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Clamped cubic spline through `(price, vol)` knots.
    Table { knots: Vec<[f64; 2]> },
}

/// Parameter overrides applied on top of the `[model]` section.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelParams {
    pub sigma0: Option<f64>,
    pub vol_of_vol: Option<f64>,
    pub rho: Option<f64>,
}

impl ModelSection {
    fn require(&self, value: Option<f64>, key: &str) -> Result<f64, ConfigError> {
        value.ok_or_else(|| invalid(format!("model type {:?} needs `{key}`", self.kind)))
    }

    /// Builds the model and correlation, with optional overrides.
    pub fn build(&self, spot: f64, over: ModelParams) -> Result<(VolModel, Correlation), ConfigError> {
        let sigma0 = over.sigma0.or(self.sigma0);
        let model = match self.kind {
            ModelType::Constant => VolModel::constant(self.require(sigma0, "sigma0")?),
            ModelType::Sabr => VolModel::sabr(
                self.require(sigma0, "sigma0")?,
                self.require(over.vol_of_vol.or(self.alpha), "alpha")?,
            ),
            ModelType::Fbergomi => VolModel::fractional_bergomi(
                self.require(sigma0, "sigma0")?,
                self.require(over.vol_of_vol.or(self.v), "v")?,
                self.require(self.hurst, "hurst")?,
            ),
            ModelType::Localvol => {
                let section = self
                    .local_vol
                    .as_ref()
                    .ok_or_else(|| invalid("model type localvol needs a [model.local_vol] table"))?;
                let func = match section {
                    LocalVolSection::Tanh {
                        base,
                        amplitude,
                        center,
                        width,
                    } => LocalVolFn::tanh(*base, *amplitude, *center, *width),
                    LocalVolSection::Table { knots } => {
                        let pairs: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
                        LocalVolFn::table(&pairs)
                    }
                }
                .map_err(|e| invalid(e.to_string()))?;
                VolModel::local_vol(func, spot)
            }
        }
        .map_err(|e| invalid(e.to_string()))?;
        let rho = Correlation::new(over.rho.unwrap_or(self.rho)).map_err(|e| invalid(e.to_string()))?;
        Ok((model, rho))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSelection {
    European,
    Asian,
    Both,
}

impl KindSelection {
    pub fn kinds(self) -> Vec<OptionKind> {
        match self {
            KindSelection::European => vec![OptionKind::European],
            KindSelection::Asian => vec![OptionKind::Asian],
            KindSelection::Both => vec![OptionKind::European, OptionKind::Asian],
        }
    }
}

fn default_spot() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSection {
    pub kind: KindSelection,
    #[serde(default = "default_spot")]
    pub spot: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strikes: Option<Vec<f64>>,
    pub maturities: Vec<f64>,
}

fn default_true() -> bool {
    true
}

fn default_batch() -> usize {
    4096
}

fn default_steps() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub antithetic: bool,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl SimSection {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            n_steps: self.n_steps,
            seed: self.seed,
            antithetic: self.antithetic,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub sigma0_range: [f64; 2],
    pub volvol_range: [f64; 2],
    pub rho_range: [f64; 2],
    pub n_draws: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub emit_svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            emit_svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    pub option: OptionSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.name
    }

    pub fn sigma0_grid(&self) -> Option<&[f64]> {
        self.grid.as_ref().and_then(|g| g.sigma0.as_deref())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let non_empty = |name: &str, xs: &[f64]| {
            if xs.is_empty() {
                Err(invalid(format!("{name} must not be empty")))
            } else if xs.iter().any(|x| !x.is_finite()) {
                Err(invalid(format!("{name} must be finite")))
            } else {
                Ok(())
            }
        };
        non_empty("option.maturities", &self.option.maturities)?;
        if self.option.maturities.iter().any(|&t| t <= 0.0) {
            return Err(invalid("option.maturities must be positive"));
        }
        if !self.option.spot.is_finite() {
            return Err(invalid("option.spot must be finite"));
        }
        if let Some(strikes) = &self.option.strikes {
            non_empty("option.strikes", strikes)?;
        }
        if let Some(grid) = &self.grid {
            for (name, list) in [("grid.sigma0", &grid.sigma0), ("grid.alpha", &grid.alpha), ("grid.rho", &grid.rho)] {
                if let Some(xs) = list {
                    non_empty(name, xs)?;
                }
            }
        }
        self.sim.sim_config().validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(s) = &self.sampling {
            for (name, [lo, hi]) in [
                ("sampling.sigma0_range", s.sigma0_range),
                ("sampling.volvol_range", s.volvol_range),
                ("sampling.rho_range", s.rho_range),
            ] {
                if !(lo < hi) {
                    return Err(invalid(format!("{name} must satisfy lo < hi, got [{lo}, {hi}]")));
                }
            }
            if s.n_draws == 0 {
                return Err(invalid("sampling.n_draws must be positive"));
            }
        }
        match self.kind() {
            ExperimentKind::LevelSweep | ExperimentKind::SkewSweep => {
                if self.sigma0_grid().is_none() {
                    return Err(invalid(format!("{} needs grid.sigma0", self.kind())));
                }
            }
            ExperimentKind::ApproxErrorTable => {
                if self.sampling.is_none() {
                    return Err(invalid("approx_error_table needs a [sampling] section"));
                }
                if self.option.strikes.is_none() {
                    return Err(invalid("approx_error_table needs option.strikes"));
                }
                if self.option.kind == KindSelection::Both {
                    return Err(invalid("approx_error_table takes a single option kind"));
                }
            }
            ExperimentKind::DecompositionCheck => {
                if self.model.kind != ModelType::Sabr {
                    return Err(invalid("decomposition_check runs on the sabr model"));
                }
                if self.option.kind != KindSelection::European {
                    return Err(invalid("decomposition_check covers European options"));
                }
            }
            ExperimentKind::SkewVsMaturity => {}
        }
        // catch missing model parameters before any simulation starts
        if self.kind() != ExperimentKind::ApproxErrorTable {
            let sigma0 = self.sigma0_grid().and_then(|g| g.first().copied());
            self.model.build(
                self.option.spot,
                ModelParams {
                    sigma0,
                    ..Default::default()
                },
            )?;
        }
        Ok(())
    }
}
