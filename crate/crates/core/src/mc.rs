//! Monte Carlo engine for the stochastic-volatility Bachelier model
//! `dS = sigma_t dW`, `W = rho W' + sqrt(1 - rho^2) B`.
//!
//! The price follows an Euler scheme on a uniform grid while the volatility is
//! evaluated exactly from its driver: SABR from `W'`, fractional Bergomi from a
//! jointly Gaussian `(dW', Z)` sample obtained through a Cholesky factor, local
//! volatility from the current price. The Asian average uses the trapezoidal
//! rule over the grid.
//!
//! Simulation units are single paths, or antithetic pairs whose second member
//! negates every standard normal draw of the first. Unit `i` always reads
//! substream `i` of the run's [`StreamKey`], and units are reduced in fixed
//! blocks merged in index order, so results are bit-identical for any number
//! of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bachelier::{self, OptionKind, OptionSpec, PricingError};
use crate::models::{build_kernel_covariance, Correlation, ModelError, VolModel};
use crate::normal::{self, sqrt_2pi};
use crate::rng::StreamKey;

/// Largest number of doubles a materialized [`PathBatch`] may hold.
const MAX_BATCH_VALUES: usize = 1 << 28;
const MAX_STEPS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("simulation too large: {0}")]
    Capacity(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("estimated price {} is not above intrinsic value {intrinsic}", .estimate.mean)]
    BelowIntrinsic { estimate: McEstimate, intrinsic: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

pub type Result<T> = std::result::Result<T, McError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Total number of paths, counting both members of antithetic pairs.
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Paths per reduction block.
    pub batch_size: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 200_000,
            n_steps: 50,
            seed: 1,
            antithetic: true,
            batch_size: 4096,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(McError::Config("n_steps must be at least 1".into()));
        }
        if self.n_steps > MAX_STEPS {
            return Err(McError::Capacity(format!("n_steps {} exceeds {MAX_STEPS}", self.n_steps)));
        }
        if self.n_paths < 2 {
            return Err(McError::Config("n_paths must be at least 2".into()));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(McError::Config("n_paths must be even with antithetic sampling".into()));
        }
        if self.batch_size == 0 {
            return Err(McError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    fn paths_per_unit(&self) -> usize {
        if self.antithetic {
            2
        } else {
            1
        }
    }

    fn units(&self) -> usize {
        self.n_paths / self.paths_per_unit()
    }
}

/// A Monte Carlo statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Number of paths behind the estimate.
    pub n: usize,
    pub ci95: (f64, f64),
}

impl McEstimate {
    pub fn new(mean: f64, stderr: f64, n: usize) -> Self {
        Self {
            mean,
            stderr,
            n,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
        }
    }

    pub fn ci_half_width(&self) -> f64 {
        1.96 * self.stderr
    }
}

/// Running means and co-moments of a vector of per-unit outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        self.count += 1;
        let n = self.count as f64;
        let mut delta = [0.0; 32];
        let delta: &mut [f64] = if d <= 32 { &mut delta[..d] } else { return self.push_slow(x) };
        for i in 0..d {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += after * delta[j];
            }
        }
    }

    fn push_slow(&mut self, x: &[f64]) {
        let d = self.dim();
        let n = self.count as f64;
        let delta: Vec<f64> = (0..d).map(|i| x[i] - self.mean[i]).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += after * delta[j];
            }
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] +=
                    other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Sample covariance of outputs `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.comoment[i * self.dim() + j] / (self.count - 1) as f64
    }

    /// Standard error of `sum_i w_i * mean_i`.
    pub fn linear_stderr(&self, weights: &[f64]) -> f64 {
        let d = self.dim();
        let mut var = 0.0;
        for i in 0..d {
            for j in 0..d {
                var += weights[i] * weights[j] * self.covariance(i, j);
            }
        }
        (var.max(0.0) / self.count.max(1) as f64).sqrt()
    }

    pub fn stderr(&self, i: usize) -> f64 {
        (self.covariance(i, i).max(0.0) / self.count.max(1) as f64).sqrt()
    }
}

/// One simulated path.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub grid: &'a [f64],
    pub spot: &'a [f64],
    pub vol: &'a [f64],
    pub terminal: f64,
    pub average: f64,
}

impl PathView<'_> {
    pub fn underlying(&self, kind: OptionKind) -> f64 {
        match kind {
            OptionKind::European => self.terminal,
            OptionKind::Asian => self.average,
        }
    }
}

/// Materialized paths. Rows are paths; with antithetic sampling rows `2j`
/// and `2j + 1` form a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub grid: Vec<f64>,
    /// `n_paths x (n_steps + 1)`, row-major.
    pub spot: Vec<f64>,
    /// `n_paths x (n_steps + 1)`, row-major.
    pub vol: Vec<f64>,
    pub average: Vec<f64>,
    pub terminal: Vec<f64>,
    pub antithetic: bool,
    pub spot0: f64,
    pub maturity: f64,
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }

    pub fn path(&self, i: usize) -> PathView<'_> {
        let w = self.grid.len();
        PathView {
            grid: &self.grid,
            spot: &self.spot[i * w..(i + 1) * w],
            vol: &self.vol[i * w..(i + 1) * w],
            terminal: self.terminal[i],
            average: self.average[i],
        }
    }
}

enum Dynamics {
    Constant(f64),
    Sabr { alpha: f64 },
    Bergomi {
        sigma0: f64,
        loading: f64,
        /// `v^2 t_i^{2H} / 2` at each grid point
        compensator: Vec<f64>,
        /// packed lower-triangular Cholesky factor, row-major
        factor: Vec<f64>,
    },
    Local,
}

struct Workspace {
    normals: Vec<f64>,
    correlated: Vec<f64>,
    spot: Vec<f64>,
    vol: Vec<f64>,
    anti_spot: Vec<f64>,
    anti_vol: Vec<f64>,
}

/// A configured simulation: model, correlation, contract, grid and stream key.
pub struct Simulator {
    model: VolModel,
    rho: Correlation,
    spec: OptionSpec,
    cfg: SimConfig,
    key: StreamKey,
    grid: Vec<f64>,
    dt: f64,
    dynamics: Dynamics,
}

impl Simulator {
    pub fn new(model: &VolModel, rho: Correlation, spec: &OptionSpec, cfg: &SimConfig) -> Result<Self> {
        spec.validate()?;
        model.validate()?;
        cfg.validate()?;
        if spec.t != 0.0 {
            return Err(McError::Usage("simulation starts at t = 0".into()));
        }
        let n = cfg.n_steps;
        let maturity = spec.maturity;
        let dt = maturity / n as f64;
        let grid: Vec<f64> = (0..=n).map(|i| maturity * i as f64 / n as f64).collect();
        let dynamics = match model {
            VolModel::Constant { sigma0 } => Dynamics::Constant(*sigma0),
            VolModel::Sabr { alpha, .. } => Dynamics::Sabr { alpha: *alpha },
            VolModel::FractionalBergomi { sigma0, v, hurst } => {
                let kernel = build_kernel_covariance(*hurst, &grid[1..])?;
                let l = kernel.joint_cholesky()?;
                let m = 2 * n;
                let mut factor = Vec::with_capacity(m * (m + 1) / 2);
                for i in 0..m {
                    for j in 0..=i {
                        factor.push(l[(i, j)]);
                    }
                }
                Dynamics::Bergomi {
                    sigma0: *sigma0,
                    loading: v * (2.0 * hurst).sqrt(),
                    compensator: grid.iter().map(|t| 0.5 * v * v * t.powf(2.0 * hurst)).collect(),
                    factor,
                }
            }
            VolModel::LocalVol { .. } => Dynamics::Local,
        };
        Ok(Self {
            model: model.clone(),
            rho,
            spec: *spec,
            cfg: *cfg,
            key: StreamKey::new(cfg.seed),
            grid,
            dt,
            dynamics,
        })
    }

    /// Replaces the stream key (by default derived from `cfg.seed`).
    pub fn with_key(mut self, key: StreamKey) -> Self {
        self.key = key;
        self
    }

    pub fn spec(&self) -> &OptionSpec {
        &self.spec
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn normals_per_unit(&self) -> usize {
        match self.dynamics {
            Dynamics::Bergomi { .. } => 3 * self.cfg.n_steps,
            _ => 2 * self.cfg.n_steps,
        }
    }

    fn workspace(&self) -> Workspace {
        let w = self.grid.len();
        Workspace {
            normals: vec![0.0; self.normals_per_unit()],
            correlated: vec![0.0; 2 * self.cfg.n_steps],
            spot: vec![0.0; w],
            vol: vec![0.0; w],
            anti_spot: vec![0.0; w],
            anti_vol: vec![0.0; w],
        }
    }

    fn draw(&self, unit: u64, ws: &mut Workspace) {
        let mut rng: ChaCha8Rng = self.key.stream(unit);
        for g in ws.normals.iter_mut() {
            *g = rng.sample(StandardNormal);
        }
        if let Dynamics::Bergomi { factor, .. } = &self.dynamics {
            let m = 2 * self.cfg.n_steps;
            let mut offset = 0;
            for i in 0..m {
                let row = &factor[offset..offset + i + 1];
                ws.correlated[i] = row.iter().zip(&ws.normals[..=i]).map(|(a, b)| a * b).sum();
                offset += i + 1;
            }
        }
    }

    /// Builds one path from the drawn normals, negated when `sign < 0`.
    /// Returns `(S_T, A_T)`.
    fn build(&self, ws_normals: &[f64], correlated: &[f64], sign: f64, spot: &mut [f64], vol: &mut [f64]) -> (f64, f64) {
        let n = self.cfg.n_steps;
        let sqdt = self.dt.sqrt();
        let rho = self.rho.value();
        let rho_c = self.rho.complement();
        spot[0] = self.spec.spot;
        vol[0] = self.model.sigma0();
        if let VolModel::LocalVol { func, .. } = &self.model {
            vol[0] = func.value(spot[0]);
        }
        let mut sum = 0.0;
        for i in 0..n {
            let (dw_prime, db) = match &self.dynamics {
                Dynamics::Bergomi { .. } => (sign * correlated[2 * i], sign * sqdt * ws_normals[2 * n + i]),
                _ => (sign * sqdt * ws_normals[2 * i], sign * sqdt * ws_normals[2 * i + 1]),
            };
            let dw = rho * dw_prime + rho_c * db;
            spot[i + 1] = spot[i] + vol[i] * dw;
            vol[i + 1] = match &self.dynamics {
                Dynamics::Constant(s) => *s,
                Dynamics::Sabr { alpha } => vol[i] * (alpha * dw_prime - 0.5 * alpha * alpha * self.dt).exp(),
                Dynamics::Bergomi {
                    sigma0,
                    loading,
                    compensator,
                    ..
                } => {
                    let z = sign * correlated[2 * i + 1];
                    sigma0 * (0.5 * (loading * z - compensator[i + 1])).exp()
                }
                Dynamics::Local => match &self.model {
                    VolModel::LocalVol { func, .. } => func.value(spot[i + 1]),
                    _ => unreachable!(),
                },
            };
            sum += 0.5 * (spot[i] + spot[i + 1]);
        }
        let average = sum * self.dt / self.spec.maturity;
        (spot[n], average)
    }

    /// Runs every unit through `f`, which writes `dim` outputs per path.
    /// Antithetic pairs contribute the average of their two outputs.
    pub fn estimate<F>(&self, dim: usize, f: F) -> Moments
    where
        F: Fn(&PathView<'_>, &mut [f64]) + Sync,
    {
        let units = self.cfg.units();
        let per_block = (self.cfg.batch_size / self.cfg.paths_per_unit()).max(1);
        let blocks = units.div_ceil(per_block);
        let partial: Vec<Moments> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut ws = self.workspace();
                let mut out = vec![0.0; dim];
                let mut anti_out = vec![0.0; dim];
                let mut acc = Moments::new(dim);
                let end = ((b + 1) * per_block).min(units);
                for unit in b * per_block..end {
                    self.draw(unit as u64, &mut ws);
                    let Workspace {
                        normals,
                        correlated,
                        spot,
                        vol,
                        anti_spot,
                        anti_vol,
                    } = &mut ws;
                    let (terminal, average) = self.build(normals, correlated, 1.0, spot, vol);
                    f(
                        &PathView {
                            grid: &self.grid,
                            spot,
                            vol,
                            terminal,
                            average,
                        },
                        &mut out,
                    );
                    if self.cfg.antithetic {
                        let (terminal, average) = self.build(normals, correlated, -1.0, anti_spot, anti_vol);
                        f(
                            &PathView {
                                grid: &self.grid,
                                spot: anti_spot,
                                vol: anti_vol,
                                terminal,
                                average,
                            },
                            &mut anti_out,
                        );
                        for (o, a) in out.iter_mut().zip(&anti_out) {
                            *o = 0.5 * (*o + a);
                        }
                    }
                    acc.push(&out);
                }
                acc
            })
            .collect();
        let mut total = Moments::new(dim);
        for m in &partial {
            total.merge(m);
        }
        total
    }

    /// Materializes every path.
    pub fn simulate(&self) -> Result<PathBatch> {
        let w = self.grid.len();
        let values = self.cfg.n_paths.checked_mul(w).filter(|v| v.saturating_mul(2) <= MAX_BATCH_VALUES);
        if values.is_none() {
            return Err(McError::Capacity(format!(
                "{} paths x {} points exceeds the in-memory batch limit",
                self.cfg.n_paths, w
            )));
        }
        let n_paths = self.cfg.n_paths;
        let mut batch = PathBatch {
            grid: self.grid.clone(),
            spot: vec![0.0; n_paths * w],
            vol: vec![0.0; n_paths * w],
            average: vec![0.0; n_paths],
            terminal: vec![0.0; n_paths],
            antithetic: self.cfg.antithetic,
            spot0: self.spec.spot,
            maturity: self.spec.maturity,
        };
        let ppu = self.cfg.paths_per_unit();
        let mut ws = self.workspace();
        for unit in 0..self.cfg.units() {
            self.draw(unit as u64, &mut ws);
            for member in 0..ppu {
                let p = unit * ppu + member;
                let sign = if member == 0 { 1.0 } else { -1.0 };
                let (spot, vol) = (
                    &mut batch.spot[p * w..(p + 1) * w],
                    &mut batch.vol[p * w..(p + 1) * w],
                );
                let (t, a) = self.build(&ws.normals, &ws.correlated, sign, spot, vol);
                batch.terminal[p] = t;
                batch.average[p] = a;
            }
        }
        Ok(batch)
    }
}

/// Simulates and materializes all paths.
pub fn simulate(model: &VolModel, rho: Correlation, spec: &OptionSpec, cfg: &SimConfig) -> Result<PathBatch> {
    Simulator::new(model, rho, spec, cfg)?.simulate()
}

fn payoff(kind: OptionKind, path: &PathView<'_>, strike: f64) -> f64 {
    (path.underlying(kind) - strike).max(0.0)
}

/// Call price from a materialized batch. With antithetic sampling each pair
/// contributes the average of its two payoffs.
pub fn price_mc(batch: &PathBatch, spec: &OptionSpec, cfg: &SimConfig) -> Result<McEstimate> {
    if batch.len() != cfg.n_paths || batch.antithetic != cfg.antithetic {
        return Err(McError::Usage("batch does not match the simulation config".into()));
    }
    if batch.maturity != spec.maturity || batch.spot0 != spec.spot || spec.t != 0.0 {
        return Err(McError::Usage("batch was simulated for a different contract".into()));
    }
    let mut acc = Moments::new(1);
    let step = if batch.antithetic { 2 } else { 1 };
    for p in (0..batch.len()).step_by(step) {
        let mut v = payoff(spec.kind, &batch.path(p), spec.strike);
        if batch.antithetic {
            v = 0.5 * (v + payoff(spec.kind, &batch.path(p + 1), spec.strike));
        }
        acc.push(&[v]);
    }
    Ok(McEstimate::new(acc.mean(0), acc.stderr(0), batch.len()))
}

/// Streaming call price estimate.
pub fn estimate_price(model: &VolModel, rho: Correlation, spec: &OptionSpec, cfg: &SimConfig) -> Result<McEstimate> {
    let sim = Simulator::new(model, rho, spec, cfg)?;
    let (kind, strike) = (spec.kind, spec.strike);
    let m = sim.estimate(1, |p, out| out[0] = payoff(kind, p, strike));
    Ok(McEstimate::new(m.mean(0), m.stderr(0), cfg.n_paths))
}

/// Call prices for several strikes from common paths; the returned moments
/// hold one output per strike.
pub fn strike_strip(sim: &Simulator, strikes: &[f64]) -> Moments {
    let kind = sim.spec().kind;
    sim.estimate(strikes.len(), |p, out| {
        let x = p.underlying(kind);
        for (o, k) in out.iter_mut().zip(strikes) {
            *o = (x - k).max(0.0);
        }
    })
}

/// Implied volatility of a price estimate; its standard error is propagated
/// through the local inverse slope `1 / vega`.
pub fn implied_vol_estimate(spec: &OptionSpec, price: &McEstimate) -> Result<McEstimate> {
    let intrinsic = spec.intrinsic();
    let iv = match bachelier::implied_vol(spec, price.mean) {
        Ok(iv) => iv,
        Err(PricingError::NoSolution { .. }) => {
            return Err(McError::BelowIntrinsic {
                estimate: *price,
                intrinsic,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let vega = bachelier::vega(spec, iv)?;
    Ok(McEstimate::new(iv, price.stderr / vega, price.n))
}

/// At-the-money implied volatility estimate. `spec.strike` must be the ATM strike.
pub fn atm_iv_mc(model: &VolModel, rho: Correlation, spec: &OptionSpec, cfg: &SimConfig) -> Result<McEstimate> {
    check_atm(spec)?;
    let price = estimate_price(model, rho, spec, cfg)?;
    implied_vol_estimate(spec, &price)
}

fn check_atm(spec: &OptionSpec) -> Result<()> {
    if (spec.strike - spec.atm_strike()).abs() > 1e-12 * spec.atm_strike().abs().max(1.0) {
        return Err(McError::Usage(format!(
            "strike {} is not the ATM strike {}",
            spec.strike,
            spec.atm_strike()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewMethod {
    DigitalMc,
    FiniteDifferenceMc,
    Quadrature,
    ClosedForm,
}

/// ATM implied-volatility level and skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub level: f64,
    pub level_stderr: f64,
    /// `d I / d k` at the ATM strike.
    pub skew_raw: f64,
    pub skew_stderr: f64,
    /// `max(1/2 - H, 0)`
    pub scaling_exponent: f64,
    /// `T^{scaling_exponent} * skew_raw`
    pub skew_scaled: f64,
    pub scaled_stderr: f64,
    pub method: SkewMethod,
}

impl SkewReport {
    fn new(level: McEstimate, skew_raw: f64, skew_stderr: f64, hurst: f64, maturity: f64, method: SkewMethod) -> Self {
        let scaling_exponent = (0.5 - hurst).max(0.0);
        let factor = if scaling_exponent == 0.0 {
            1.0
        } else {
            maturity.powf(scaling_exponent)
        };
        Self {
            level: level.mean,
            level_stderr: level.stderr,
            skew_raw,
            skew_stderr,
            scaling_exponent,
            skew_scaled: skew_raw * factor,
            scaled_stderr: skew_stderr * factor,
            method,
        }
    }
}

/// Skew from the exercise probability:
/// `(1/2 - P[X_T >= k*]) / vega_ATM`, `vega_ATM = sqrt(T / 2 pi)` (European)
/// or `sqrt(T / 6 pi)` (Asian).
pub fn skew_digital(model: &VolModel, rho: Correlation, spec: &OptionSpec, cfg: &SimConfig) -> Result<SkewReport> {
    let sim = Simulator::new(model, rho, spec, cfg)?;
    skew_digital_with(&sim, model.effective_hurst())
}

/// [`skew_digital`] on a prepared simulator.
pub fn skew_digital_with(sim: &Simulator, hurst: f64) -> Result<SkewReport> {
    let spec = *sim.spec();
    check_atm(&spec)?;
    let (kind, k) = (spec.kind, spec.strike);
    let m = sim.estimate(2, |p, out| {
        let x = p.underlying(kind);
        out[0] = (x - k).max(0.0);
        out[1] = if x >= k { 1.0 } else { 0.0 };
    });
    let n = sim.config().n_paths;
    let level = implied_vol_estimate(&spec, &McEstimate::new(m.mean(0), m.stderr(0), n))?;
    let atm_vega = spec.vol_scale() / sqrt_2pi();
    let skew = (0.5 - m.mean(1)) / atm_vega;
    let se = m.stderr(1) / atm_vega;
    Ok(SkewReport::new(level, skew, se, hurst, spec.maturity, SkewMethod::DigitalMc))
}

/// Central finite difference of implied volatilities at `k* +- bump` with
/// common random numbers.
pub fn skew_finite_difference(
    model: &VolModel,
    rho: Correlation,
    spec: &OptionSpec,
    cfg: &SimConfig,
    bump: f64,
) -> Result<SkewReport> {
    let sim = Simulator::new(model, rho, spec, cfg)?;
    skew_finite_difference_with(&sim, model.effective_hurst(), bump)
}

/// [`skew_finite_difference`] on a prepared simulator.
pub fn skew_finite_difference_with(sim: &Simulator, hurst: f64, bump: f64) -> Result<SkewReport> {
    let spec = *sim.spec();
    check_atm(&spec)?;
    if !(bump > 0.0 && bump.is_finite()) {
        return Err(McError::Usage(format!("bump must be positive, got {bump}")));
    }
    let k = spec.strike;
    let strikes = [k, k - bump, k + bump];
    let m = strike_strip(sim, &strikes);
    let n = sim.config().n_paths;
    let level = implied_vol_estimate(&spec, &McEstimate::new(m.mean(0), m.stderr(0), n))?;
    let down_spec = spec.with_strike(k - bump);
    let up_spec = spec.with_strike(k + bump);
    let down = implied_vol_estimate(&down_spec, &McEstimate::new(m.mean(1), m.stderr(1), n))?;
    let up = implied_vol_estimate(&up_spec, &McEstimate::new(m.mean(2), m.stderr(2), n))?;
    let skew = (up.mean - down.mean) / (2.0 * bump);
    let w_down = -1.0 / (2.0 * bump * bachelier::vega(&down_spec, down.mean)?);
    let w_up = 1.0 / (2.0 * bump * bachelier::vega(&up_spec, up.mean)?);
    let se = m.linear_stderr(&[0.0, w_down, w_up]);
    Ok(SkewReport::new(level, skew, se, hurst, spec.maturity, SkewMethod::FiniteDifferenceMc))
}

/// Both sides of the European decomposition formula under SABR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Direct Monte Carlo price.
    pub lhs: McEstimate,
    /// `E[B_E(0, S_0, k, v'_0)] + correction`
    pub rhs: McEstimate,
    /// `E[B_E(0, S_0, k, v'_0)]`
    pub conditional: McEstimate,
    /// `E[int_0^T H(s, S_s, k, v'_s) sigma_s int_s^T D_s^W sigma_r^2 dr ds]`
    pub correction: McEstimate,
    /// `lhs - rhs`
    pub gap: f64,
    /// Standard error of the pathwise difference `lhs - rhs`.
    pub joint_stderr: f64,
}

/// Checks the European decomposition under SABR at `t = 0`.
///
/// `v'_s = sqrt(int_s^T sigma_r^2 dr / (T - s))` and the inner integrals are
/// accumulated backwards from `T` with the trapezoidal rule on the simulation
/// grid; the outer `ds` integral is trapezoidal on the same grid, with a zero
/// integrand at `s = T`. `D_s^W sigma_r^2 = 2 rho alpha sigma_r^2`. With
/// `alpha = 0` the model degenerates to constant volatility.
pub fn decomposition_check_sabr(
    sigma0: f64,
    alpha: f64,
    rho: Correlation,
    spec: &OptionSpec,
    cfg: &SimConfig,
) -> Result<Decomposition> {
    let model = if alpha == 0.0 {
        VolModel::constant(sigma0)?
    } else {
        VolModel::sabr(sigma0, alpha)?
    };
    decomposition_check(&model, rho, spec, cfg)
}

/// [`decomposition_check_sabr`] for a model value; only SABR and constant
/// volatility are supported.
pub fn decomposition_check(model: &VolModel, rho: Correlation, spec: &OptionSpec, cfg: &SimConfig) -> Result<Decomposition> {
    let alpha = match model {
        VolModel::Sabr { alpha, .. } => *alpha,
        VolModel::Constant { .. } => 0.0,
        other => {
            return Err(McError::Unsupported(format!(
                "decomposition check is implemented for SABR only, got {}",
                other.name()
            )))
        }
    };
    if spec.kind != OptionKind::European {
        return Err(McError::Unsupported("decomposition check covers European calls".into()));
    }
    let sim = Simulator::new(model, rho, spec, cfg)?;
    let (s0, k, maturity) = (spec.spot, spec.strike, spec.maturity);
    let deriv_factor = 2.0 * rho.value() * alpha;
    let n = cfg.n_steps;
    let m = sim.estimate(3, |p, out| {
        let dt = maturity / n as f64;
        out[0] = (p.terminal - k).max(0.0);
        // backward cumulative int_{t_i}^T sigma^2 dr
        let mut inner = 0.0;
        let mut prev_integrand = 0.0; // at s = T
        let mut correction = 0.0;
        for i in (0..n).rev() {
            let (a, b) = (p.vol[i], p.vol[i + 1]);
            inner += 0.5 * (a * a + b * b) * dt;
            let tau = maturity - p.grid[i];
            let v_prime = (inner / tau).sqrt();
            let integrand = h_kernel_raw(p.spot[i] - k, v_prime, tau) * a * deriv_factor * inner;
            correction += 0.5 * (integrand + prev_integrand) * dt;
            prev_integrand = integrand;
        }
        let v0 = (inner / maturity).sqrt();
        let stdev = v0 * maturity.sqrt();
        let d = (s0 - k) / stdev;
        out[1] = (s0 - k) * normal::cdf(d) + stdev * normal::pdf(d);
        out[2] = correction;
    });
    let np = cfg.n_paths;
    let lhs = McEstimate::new(m.mean(0), m.stderr(0), np);
    let conditional = McEstimate::new(m.mean(1), m.stderr(1), np);
    let correction = McEstimate::new(m.mean(2), m.stderr(2), np);
    let rhs = McEstimate::new(m.mean(1) + m.mean(2), m.linear_stderr(&[0.0, 1.0, 1.0]), np);
    Ok(Decomposition {
        lhs,
        rhs,
        conditional,
        correction,
        gap: lhs.mean - rhs.mean,
        joint_stderr: m.linear_stderr(&[1.0, -1.0, -1.0]),
    })
}

/// `-d n(d) / (2 sigma^2 tau)` with `d = moneyness / (sigma sqrt(tau))`.
#[inline]
fn h_kernel_raw(moneyness: f64, sigma: f64, tau: f64) -> f64 {
    let d = moneyness / (sigma * tau.sqrt());
    -0.5 * d * normal::pdf(d) / (sigma * sigma * tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_paths: usize, antithetic: bool) -> SimConfig {
        SimConfig {
            n_paths,
            n_steps: 20,
            seed: 0,
            antithetic,
            batch_size: 256,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(101, true).validate().is_err());
        assert!(cfg(101, false).validate().is_ok());
        assert!(cfg(1, false).validate().is_err());
        let mut c = cfg(100, true);
        c.n_steps = 0;
        assert!(c.validate().is_err());
        c.n_steps = MAX_STEPS + 1;
        assert!(matches!(c.validate(), Err(McError::Capacity(_))));
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 0.3, (i as f64).sin()]).collect();
        let mut all = Moments::new(2);
        xs.iter().for_each(|x| all.push(x));
        let mut a = Moments::new(2);
        let mut b = Moments::new(2);
        xs[..17].iter().for_each(|x| a.push(x));
        xs[17..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean(i) - all.mean(i)).abs() < 1e-13);
            for j in 0..2 {
                assert!((a.covariance(i, j) - all.covariance(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_kernel_raw_matches_public_kernel() {
        let a = h_kernel_raw(0.3, 0.4, 0.5);
        let b = bachelier::h_kernel(0.5, 10.3, 10.0, 0.4, 1.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn antithetic_member_negates_drivers() {
        let model = VolModel::constant(0.3).unwrap();
        let spec = OptionSpec::european(10.0, 10.0, 0.5).unwrap();
        let batch = simulate(&model, Correlation::new(-0.3).unwrap(), &spec, &cfg(4, true)).unwrap();
        for pair in 0..2 {
            let (a, b) = (batch.path(2 * pair), batch.path(2 * pair + 1));
            for i in 0..a.spot.len() {
                assert!((a.spot[i] - 10.0 + b.spot[i] - 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn price_mc_rejects_mismatched_batch() {
        let model = VolModel::constant(0.3).unwrap();
        let spec = OptionSpec::european(10.0, 10.0, 0.5).unwrap();
        let c = cfg(8, true);
        let batch = simulate(&model, Correlation::zero(), &spec, &c).unwrap();
        let other = OptionSpec::european(10.0, 10.0, 0.25).unwrap();
        assert!(matches!(price_mc(&batch, &other, &c), Err(McError::Usage(_))));
        assert!(matches!(price_mc(&batch, &spec, &cfg(16, true)), Err(McError::Usage(_))));
    }

    #[test]
    fn non_atm_strike_is_rejected_by_atm_estimators() {
        let model = VolModel::constant(0.3).unwrap();
        let spec = OptionSpec::european(10.0, 10.5, 0.5).unwrap();
        assert!(matches!(
            skew_digital(&model, Correlation::zero(), &spec, &cfg(8, true)),
            Err(McError::Usage(_))
        ));
    }

    #[test]
    fn decomposition_rejects_other_models() {
        let model = VolModel::fractional_bergomi(0.3, 0.5, 0.4).unwrap();
        let spec = OptionSpec::european(10.0, 10.0, 0.1).unwrap();
        assert!(matches!(
            decomposition_check(&model, Correlation::zero(), &spec, &cfg(8, true)),
            Err(McError::Unsupported(_))
        ));
    }
}
