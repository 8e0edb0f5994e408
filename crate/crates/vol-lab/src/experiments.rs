//! The experiment runners behind `vol-lab run`.

use std::path::{Path, PathBuf};

use bachelier_sv::asymptotics::{self, skew_limit_closed, AsymptoticsError};
use bachelier_sv::bachelier::{OptionKind, OptionSpec, PricingError};
use bachelier_sv::mc::{
    decomposition_check_sabr, implied_vol_estimate, skew_digital_with, strike_strip, McError, McEstimate,
    Simulator,
};
use bachelier_sv::models::{Correlation, ModelError, VolModel};
use bachelier_sv::rng::StreamKey;
use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, ModelParams};
use crate::plot::{emit_plot_data, PlotError, PlotStyle};
use crate::table::{ResultTable, Value};

/// Stream label for the parameter draws of the approximation-error table.
const PARAMETER_STREAM: u64 = 0x7061_7261_6d73;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] McError),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("failed to write results: {0}")]
    Output(#[from] PlotError),
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io { .. }) | RunError::Output(_) => 1,
            RunError::Config(_) => 2,
            RunError::Simulation(e) => match e {
                McError::Config(_) | McError::Usage(_) | McError::Unsupported(_) => 2,
                McError::Model(ModelError::Domain(_)) | McError::Pricing(PricingError::Domain(_)) => 2,
                _ => 3,
            },
            RunError::Asymptotics(e) => match e {
                AsymptoticsError::Domain(_) | AsymptoticsError::Unsupported(_) => 2,
                AsymptoticsError::Model(ModelError::Domain(_)) => 2,
                _ => 3,
            },
            RunError::Pricing(PricingError::Domain(_)) => 2,
            RunError::Pricing(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

/// Tables produced by one run, each with the chart style it is drawn in.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: Vec<(ResultTable, Option<PlotStyle>)>,
    pub summary: Vec<String>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().map(|(t, _)| t).find(|t| t.name == name)
    }

    /// Writes every table as CSV, plus plot files for tables with a style.
    pub fn write(&self, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(PlotError::from)?;
        let mut written = Vec::new();
        for (table, style) in &self.tables {
            match style {
                Some(style) => written.extend(emit_plot_data(table, *style, dir, svg)?),
                None => written.push(table.save_csv(dir).map_err(PlotError::from)?),
            }
        }
        Ok(written)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    info!("running {} with {} paths", cfg.kind(), cfg.sim.n_paths);
    match cfg.kind() {
        ExperimentKind::LevelSweep => {
            let t = run_level_sweep(cfg)?;
            let summary = vec![format!("{} grid points", t.len())];
            Ok(ExperimentOutput {
                tables: vec![(t, Some(PlotStyle::LevelSweep))],
                summary,
            })
        }
        ExperimentKind::SkewSweep => {
            let t = run_skew_sweep(cfg)?;
            let summary = vec![format!("{} grid points", t.len())];
            Ok(ExperimentOutput {
                tables: vec![(t, Some(PlotStyle::SkewSweep))],
                summary,
            })
        }
        ExperimentKind::SkewVsMaturity => {
            let (t, fit) = run_skew_vs_maturity(cfg)?;
            let kinds = fit.text_column("kind").unwrap_or_default();
            let exps = fit.column("exponent").unwrap_or_default();
            let summary = kinds
                .iter()
                .zip(&exps)
                .map(|(k, e)| format!("{k}: fitted exponent {e:.4}"))
                .collect();
            Ok(ExperimentOutput {
                tables: vec![(t, Some(PlotStyle::SkewVsMaturity)), (fit, None)],
                summary,
            })
        }
        ExperimentKind::ApproxErrorTable => {
            let tables = run_approx_error_table(cfg)?;
            let summary = vec![format!(
                "{} failed implied-volatility inversions out of {}",
                tables.failed, tables.attempted
            )];
            Ok(ExperimentOutput {
                tables: vec![
                    (tables.ci_error, Some(PlotStyle::ApproxError)),
                    (tables.difference, Some(PlotStyle::ApproxError)),
                ],
                summary,
            })
        }
        ExperimentKind::DecompositionCheck => {
            let t = run_decomposition_check(cfg)?;
            let passed = t.column("pass").unwrap_or_default().iter().filter(|&&p| p == 1.0).count();
            let summary = vec![format!("{passed} of {} rows within tolerance", t.len())];
            Ok(ExperimentOutput {
                tables: vec![(t, Some(PlotStyle::Decomposition))],
                summary,
            })
        }
    }
}

fn series_label(kind: OptionKind, maturity: f64) -> String {
    format!("{} T={maturity}", kind.name())
}

/// Key for one grid cell: derived from the seed and the cell's coordinates.
fn cell_key(seed: u64, coords: &[u64]) -> StreamKey {
    coords.iter().fold(StreamKey::new(seed), |k, &c| k.derive(c))
}

fn atm_simulator(
    cfg: &ExperimentConfig,
    kind: OptionKind,
    maturity: f64,
    sigma0: f64,
    key: StreamKey,
) -> Result<(Simulator, VolModel, Correlation)> {
    let spot = cfg.option.spot;
    let (model, rho) = cfg.model.build(
        spot,
        ModelParams {
            sigma0: Some(sigma0),
            ..Default::default()
        },
    )?;
    let spec = OptionSpec::at_inception(kind, spot, spot, maturity)?;
    let sim = Simulator::new(&model, rho, &spec, &cfg.sim.sim_config())?.with_key(key);
    Ok((sim, model, rho))
}

/// ATM implied volatility against its short-maturity limit `sigma0`.
pub fn run_level_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(
        "level_sweep",
        &["series", "kind", "maturity", "sigma0", "iv_hat", "stderr", "theory", "abs_error", "ci_half_width"],
    );
    let grid = cfg.sigma0_grid().unwrap_or_default();
    for (ki, kind) in cfg.option.kind.kinds().into_iter().enumerate() {
        for (ti, &maturity) in cfg.option.maturities.iter().enumerate() {
            for (si, &sigma0) in grid.iter().enumerate() {
                let key = cell_key(cfg.sim.seed, &[ki as u64, ti as u64, si as u64]);
                let (sim, model, _) = atm_simulator(cfg, kind, maturity, sigma0, key)?;
                let m = strike_strip(&sim, &[sim.spec().strike]);
                let price = McEstimate::new(m.mean(0), m.stderr(0), cfg.sim.n_paths);
                let iv = implied_vol_estimate(sim.spec(), &price)?;
                let theory = asymptotics::level_limit(&model);
                table.push(vec![
                    series_label(kind, maturity).as_str().into(),
                    kind.name().into(),
                    maturity.into(),
                    sigma0.into(),
                    iv.mean.into(),
                    iv.stderr.into(),
                    theory.into(),
                    (iv.mean - theory).abs().into(),
                    iv.ci_half_width().into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Digital Monte Carlo skew against the closed-form limit.
pub fn run_skew_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(
        "skew_sweep",
        &[
            "series",
            "kind",
            "maturity",
            "sigma0",
            "level",
            "level_stderr",
            "skew_raw",
            "skew_stderr",
            "scaling_exponent",
            "skew_scaled",
            "scaled_stderr",
            "theory",
            "theory_leading",
        ],
    );
    let grid = cfg.sigma0_grid().unwrap_or_default();
    for (ki, kind) in cfg.option.kind.kinds().into_iter().enumerate() {
        for (ti, &maturity) in cfg.option.maturities.iter().enumerate() {
            for (si, &sigma0) in grid.iter().enumerate() {
                let key = cell_key(cfg.sim.seed, &[ki as u64, ti as u64, si as u64]);
                let (sim, model, rho) = atm_simulator(cfg, kind, maturity, sigma0, key)?;
                let report = skew_digital_with(&sim, model.effective_hurst())?;
                let limit = skew_limit_closed(kind, &model, rho)?;
                let scale = if report.scaling_exponent == 0.0 {
                    1.0
                } else {
                    maturity.powf(report.scaling_exponent)
                };
                table.push(vec![
                    series_label(kind, maturity).as_str().into(),
                    kind.name().into(),
                    maturity.into(),
                    sigma0.into(),
                    report.level.into(),
                    report.level_stderr.into(),
                    report.skew_raw.into(),
                    report.skew_stderr.into(),
                    report.scaling_exponent.into(),
                    report.skew_scaled.into(),
                    report.scaled_stderr.into(),
                    limit.value.into(),
                    (limit.raw_slope(maturity) * scale).into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Least-squares power law `|skew| = prefactor * T^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub n_points: usize,
    pub n_excluded: usize,
}

/// Fits `log|y|` against `log x`; points with `y == 0` are left out.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    let n_excluded = xs.len() - pts.len();
    if n_excluded > 0 {
        warn!("{n_excluded} zero skew magnitudes excluded from the power-law fit");
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let exponent_stderr = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(PowerFit {
        prefactor: intercept.exp(),
        exponent: slope,
        exponent_stderr,
        n_points: pts.len(),
        n_excluded,
    })
}

/// Skew as a function of maturity at the configured `sigma0`, with the
/// fitted power law per option kind.
pub fn run_skew_vs_maturity(cfg: &ExperimentConfig) -> Result<(ResultTable, ResultTable)> {
    let mut table = ResultTable::new(
        "skew_vs_maturity",
        &["kind", "maturity", "skew_raw", "skew_stderr", "skew_scaled", "scaled_stderr", "theory_raw"],
    );
    let mut fits = ResultTable::new(
        "skew_vs_maturity_fit",
        &["kind", "prefactor", "exponent", "exponent_stderr", "n_points", "n_excluded"],
    );
    let sigma0 = cfg
        .sigma0_grid()
        .and_then(|g| g.first().copied())
        .or(cfg.model.sigma0)
        .ok_or_else(|| ConfigError::Invalid("skew_vs_maturity needs model.sigma0".into()))?;
    for (ki, kind) in cfg.option.kind.kinds().into_iter().enumerate() {
        let mut skews = Vec::new();
        for (ti, &maturity) in cfg.option.maturities.iter().enumerate() {
            let key = cell_key(cfg.sim.seed, &[ki as u64, ti as u64]);
            let (sim, model, rho) = atm_simulator(cfg, kind, maturity, sigma0, key)?;
            let report = skew_digital_with(&sim, model.effective_hurst())?;
            let theory = skew_limit_closed(kind, &model, rho)?.raw_slope(maturity);
            skews.push(report.skew_raw);
            table.push(vec![
                kind.name().into(),
                maturity.into(),
                report.skew_raw.into(),
                report.skew_stderr.into(),
                report.skew_scaled.into(),
                report.scaled_stderr.into(),
                theory.into(),
            ]);
        }
        if let Some(fit) = fit_power_law(&cfg.option.maturities, &skews) {
            fits.push(vec![
                kind.name().into(),
                fit.prefactor.into(),
                fit.exponent.into(),
                fit.exponent_stderr.into(),
                fit.n_points.into(),
                fit.n_excluded.into(),
            ]);
        } else {
            warn!("not enough non-zero skews to fit a power law for {}", kind.name());
        }
    }
    Ok((table, fits))
}

/// Median with an order-statistic standard error (distribution-free 95%
/// interval divided by `2 * 1.96`).
pub fn median_with_stderr(values: &mut [f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    values.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    };
    let half = 1.96 * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor().max(0.0) as usize).min(n - 1);
    let hi = ((n as f64 / 2.0 + half).ceil() as usize).min(n - 1);
    (median, (values[hi] - values[lo]) / (2.0 * 1.96))
}

pub struct ApproxTables {
    /// `1.96 * stderr(IV) / IV` in percent.
    pub ci_error: ResultTable,
    /// `|IV_approx - IV_mc| / IV_mc` in percent.
    pub difference: ResultTable,
    pub attempted: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy)]
struct DrawParams {
    sigma0: f64,
    vol_of_vol: f64,
    rho: f64,
}

fn sample_params(cfg: &ExperimentConfig, draw: u64) -> DrawParams {
    let s = cfg.sampling.as_ref().expect("validated sampling section");
    let mut rng = StreamKey::new(cfg.sim.seed).derive(PARAMETER_STREAM).stream(draw);
    let mut uniform = |[lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
    DrawParams {
        sigma0: uniform(s.sigma0_range),
        vol_of_vol: uniform(s.volvol_range),
        rho: uniform(s.rho_range),
    }
}

/// Per strike: `Some((ci_metric, difference_metric))`, `None` when the
/// Monte Carlo price could not be inverted.
fn approx_cell(cfg: &ExperimentConfig, kind: OptionKind, draw: u64, ti: usize) -> Result<Vec<Option<(f64, f64)>>> {
    let p = sample_params(cfg, draw);
    let spot = cfg.option.spot;
    let maturity = cfg.option.maturities[ti];
    let strikes = cfg.option.strikes.as_deref().expect("validated strikes");
    let (model, rho) = cfg.model.build(
        spot,
        ModelParams {
            sigma0: Some(p.sigma0),
            vol_of_vol: Some(p.vol_of_vol),
            rho: Some(p.rho),
        },
    )?;
    let spec = OptionSpec::at_inception(kind, spot, spot, maturity)?;
    let key = cell_key(cfg.sim.seed, &[draw, ti as u64]);
    let sim = Simulator::new(&model, rho, &spec, &cfg.sim.sim_config())?.with_key(key);
    let moments = strike_strip(&sim, strikes);
    let approx = asymptotics::linear_approx(kind, &model, rho, spot, maturity)?;
    let mut out = Vec::with_capacity(strikes.len());
    for (i, &k) in strikes.iter().enumerate() {
        let price = McEstimate::new(moments.mean(i), moments.stderr(i), cfg.sim.n_paths);
        let cell = match implied_vol_estimate(&spec.with_strike(k), &price) {
            Ok(iv) => {
                let ci = 1.96 * iv.stderr / iv.mean * 100.0;
                let diff = (approx.iv(k) - iv.mean).abs() / iv.mean * 100.0;
                Some((ci, diff))
            }
            Err(McError::BelowIntrinsic { .. }) | Err(McError::Pricing(PricingError::NotConverged { .. })) => None,
            Err(e) => return Err(e.into()),
        };
        out.push(cell);
    }
    Ok(out)
}

/// Median errors of the linear implied-volatility approximation over random
/// parameter draws, per `(maturity, strike)` cell.
pub fn run_approx_error_table(cfg: &ExperimentConfig) -> Result<ApproxTables> {
    let kind = cfg.option.kind.kinds()[0];
    let sampling = cfg.sampling.as_ref().expect("validated sampling section");
    let strikes = cfg.option.strikes.clone().expect("validated strikes");
    let n_mat = cfg.option.maturities.len();
    let tasks: Vec<(u64, usize)> = (0..sampling.n_draws as u64)
        .flat_map(|d| (0..n_mat).map(move |ti| (d, ti)))
        .collect();
    let results: Vec<Vec<Option<(f64, f64)>>> = tasks
        .par_iter()
        .map(|&(d, ti)| approx_cell(cfg, kind, d, ti))
        .collect::<Result<_>>()?;

    let columns = ["kind", "maturity", "strike", "n_ok", "n_failed", "median", "median_stderr", "metric"];
    let mut ci_error = ResultTable::new(format!("approx_ci_error_{}", kind.name()), &columns);
    let mut difference = ResultTable::new(format!("approx_difference_{}", kind.name()), &columns);
    let mut failed = 0;
    for (ti, &maturity) in cfg.option.maturities.iter().enumerate() {
        for (ki, &k) in strikes.iter().enumerate() {
            let cells: Vec<(f64, f64)> = tasks
                .iter()
                .zip(&results)
                .filter(|((_, t), _)| *t == ti)
                .filter_map(|(_, r)| r[ki])
                .collect();
            let n_failed = sampling.n_draws - cells.len();
            failed += n_failed;
            for (table, pick, metric) in [
                (&mut ci_error, 0, "100*1.96*stderr(iv_mc)/iv_mc"),
                (&mut difference, 1, "100*|iv_approx-iv_mc|/iv_mc"),
            ] {
                let mut xs: Vec<f64> = cells.iter().map(|c| if pick == 0 { c.0 } else { c.1 }).collect();
                let (median, se) = median_with_stderr(&mut xs);
                table.push(vec![
                    kind.name().into(),
                    maturity.into(),
                    k.into(),
                    cells.len().into(),
                    n_failed.into(),
                    median.into(),
                    se.into(),
                    metric.into(),
                ]);
            }
        }
    }
    if failed > 0 {
        warn!("{failed} cells excluded after failed implied-volatility inversion");
    }
    Ok(ApproxTables {
        ci_error,
        difference,
        attempted: sampling.n_draws * n_mat * strikes.len(),
        failed,
    })
}

/// Outcome of the decomposition check at one parameter point and resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionRow {
    pub n_steps: usize,
    pub gap: f64,
    pub joint_stderr: f64,
    /// Difference of the gaps at `n` and `2n` steps.
    pub richardson: f64,
    pub pass: bool,
}

/// Runs the decomposition check at `n_steps` and `2 n_steps`; each
/// resolution passes when `|gap| <= 3 joint_stderr + |richardson|`.
pub fn decomposition_pair(
    sigma0: f64,
    alpha: f64,
    rho: Correlation,
    spec: &OptionSpec,
    sim: &bachelier_sv::mc::SimConfig,
) -> Result<[(bachelier_sv::mc::Decomposition, DecompositionRow); 2]> {
    let coarse = decomposition_check_sabr(sigma0, alpha, rho, spec, sim)?;
    let fine_cfg = bachelier_sv::mc::SimConfig {
        n_steps: 2 * sim.n_steps,
        ..*sim
    };
    let fine = decomposition_check_sabr(sigma0, alpha, rho, spec, &fine_cfg)?;
    let richardson = fine.gap - coarse.gap;
    let row = |d: &bachelier_sv::mc::Decomposition, n_steps| DecompositionRow {
        n_steps,
        gap: d.gap,
        joint_stderr: d.joint_stderr,
        richardson,
        pass: d.gap.abs() <= 3.0 * d.joint_stderr + richardson.abs(),
    };
    Ok([
        (coarse, row(&coarse, sim.n_steps)),
        (fine, row(&fine, fine_cfg.n_steps)),
    ])
}

/// Both sides of the SABR European decomposition over a parameter grid.
pub fn run_decomposition_check(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(
        "decomposition_check",
        &[
            "sigma0",
            "alpha",
            "rho",
            "maturity",
            "strike",
            "n_steps",
            "lhs",
            "lhs_stderr",
            "rhs",
            "rhs_stderr",
            "correction",
            "correction_stderr",
            "gap",
            "joint_stderr",
            "richardson",
            "pass",
        ],
    );
    let grid = cfg.grid.clone().unwrap_or_default();
    let single = |x: Option<f64>, name: &str| -> Result<Vec<f64>> {
        x.map(|v| vec![v])
            .ok_or_else(|| ConfigError::Invalid(format!("decomposition_check needs model.{name} or grid.{name}")).into())
    };
    let sigmas = match grid.sigma0 {
        Some(v) => v,
        None => single(cfg.model.sigma0, "sigma0")?,
    };
    let alphas = match grid.alpha {
        Some(v) => v,
        None => single(cfg.model.alpha, "alpha")?,
    };
    let rhos = grid.rho.unwrap_or_else(|| vec![cfg.model.rho]);
    let spot = cfg.option.spot;
    let strikes = cfg.option.strikes.clone().unwrap_or_else(|| vec![spot]);
    let sim = cfg.sim.sim_config();
    for &sigma0 in &sigmas {
        for &alpha in &alphas {
            for &r in &rhos {
                let rho = Correlation::new(r).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                for &maturity in &cfg.option.maturities {
                    for &k in &strikes {
                        let spec = OptionSpec::european(spot, k, maturity)?;
                        for (d, row) in decomposition_pair(sigma0, alpha, rho, &spec, &sim)? {
                            table.push(vec![
                                sigma0.into(),
                                alpha.into(),
                                r.into(),
                                maturity.into(),
                                k.into(),
                                row.n_steps.into(),
                                d.lhs.mean.into(),
                                d.lhs.stderr.into(),
                                d.rhs.mean.into(),
                                d.rhs.stderr.into(),
                                d.correction.mean.into(),
                                d.correction.stderr.into(),
                                d.gap.into(),
                                d.joint_stderr.into(),
                                row.richardson.into(),
                                Value::from(row.pass),
                            ]);
                        }
                    }
                }
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_spread() {
        let mut xs = vec![5.0, 1.0, 3.0, 2.0, 4.0];
        let (m, se) = median_with_stderr(&mut xs);
        assert_eq!(m, 3.0);
        assert!(se > 0.0);
        let (m, _) = median_with_stderr(&mut [1.0, 2.0]);
        assert_eq!(m, 1.5);
        assert!(median_with_stderr(&mut []).0.is_nan());
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let xs = [1e-3, 1e-2, 1e-1, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| -0.05 * x.powf(-0.1)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent + 0.1).abs() < 1e-12);
        assert!((fit.prefactor - 0.05).abs() < 1e-12);
        let fit = fit_power_law(&[1e-3, 1e-2, 1e-1], &[0.0, 0.2, 0.1]).unwrap();
        assert_eq!(fit.n_excluded, 1);
        assert!(fit_power_law(&[1.0], &[1.0]).is_none());
    }
}
