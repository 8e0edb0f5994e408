//! Volatility model catalog: constant, SABR (lognormal, skewness parameter 1),
//! fractional Bergomi and local volatility.
//!
//! Each model knows how to evaluate its volatility exactly from its driver,
//! its effective Hurst exponent and the expectation of the Malliavin
//! derivative `E[D_r sigma_u]` with respect to the volatility Brownian motion.
//! The fractional kernel `Z_t = int_0^t (t-s)^{H-1/2} dW'_s` is sampled through
//! [`KernelCovariance`].

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::quadrature::GaussJacobi;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Correlation between the price and volatility Brownian motions, `|rho| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho.abs() < 1.0 {
            Ok(Self(rho))
        } else {
            Err(ModelError::Domain(format!("correlation must lie in (-1, 1), got {rho}")))
        }
    }

    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `sqrt(1 - rho^2)`
    pub fn complement(self) -> f64 {
        (1.0 - self.0 * self.0).sqrt()
    }
}

/// Local volatility function `x -> sigma(x)`, bounded below by a positive
/// constant with two bounded derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalVolFn {
    /// `base + amplitude * tanh((x - center) / width)`, requires `base > |amplitude|`.
    Tanh {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Clamped cubic spline through a knot table, flat outside the knots.
    Spline(ClampedSpline),
}

impl LocalVolFn {
    pub fn tanh(base: f64, amplitude: f64, center: f64, width: f64) -> Result<Self> {
        let ok = [base, amplitude, center, width].iter().all(|v| v.is_finite())
            && width > 0.0
            && base > amplitude.abs();
        if !ok {
            return Err(ModelError::Domain(
                "tanh local vol needs finite inputs, width > 0 and base > |amplitude|".into(),
            ));
        }
        Ok(Self::Tanh {
            base,
            amplitude,
            center,
            width,
        })
    }

    pub fn table(knots: &[(f64, f64)]) -> Result<Self> {
        Ok(Self::Spline(ClampedSpline::new(knots)?))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Tanh {
                base,
                amplitude,
                center,
                width,
            } => base + amplitude * ((x - center) / width).tanh(),
            Self::Spline(s) => s.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Tanh {
                amplitude,
                center,
                width,
                ..
            } => {
                let th = ((x - center) / width).tanh();
                amplitude * (1.0 - th * th) / width
            }
            Self::Spline(s) => s.derivative(x),
        }
    }

    /// A positive lower bound of the function.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Self::Tanh { base, amplitude, .. } => base - amplitude.abs(),
            Self::Spline(s) => s.min_value,
        }
    }
}

/// Cubic spline with zero end slopes, extended as a constant beyond the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
    min_value: f64,
}

impl ClampedSpline {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(ModelError::Domain("spline needs at least two knots".into()));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::Domain(
                "spline knots must be finite with strictly increasing abscissae".into(),
            ));
        }
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let slope = |i: usize| (ys[i + 1] - ys[i]) / h[i];

        // tridiagonal system for the second derivatives, zero end slopes
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * slope(0);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * (slope(i) - slope(i - 1));
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = -6.0 * slope(n - 2);
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut second = vec![0.0; n];
        second[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = (rhs[i] - sup[i] * second[i + 1]) / diag[i];
        }

        let mut spline = Self {
            xs,
            ys,
            second,
            min_value: 0.0,
        };
        let mut min_value = f64::INFINITY;
        for i in 0..n - 1 {
            for j in 0..=64 {
                let x = spline.xs[i] + h[i] * j as f64 / 64.0;
                min_value = min_value.min(spline.value(x));
            }
        }
        if min_value <= 0.0 {
            return Err(ModelError::Domain(
                "local volatility table must stay strictly positive".into(),
            ));
        }
        spline.min_value = min_value;
        Ok(spline)
    }

    fn locate(&self, x: f64) -> Option<(usize, f64, f64)> {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return None;
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        Some((i, x - self.xs[i], self.xs[i + 1] - self.xs[i]))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.locate(x) {
            None if x <= self.xs[0] => self.ys[0],
            None => self.ys[self.ys.len() - 1],
            Some((i, t, h)) => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let b = (self.ys[i + 1] - self.ys[i]) / h - h * (2.0 * m0 + m1) / 6.0;
                self.ys[i] + t * (b + t * (0.5 * m0 + t * (m1 - m0) / (6.0 * h)))
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            None => 0.0,
            Some((i, t, h)) => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let b = (self.ys[i + 1] - self.ys[i]) / h - h * (2.0 * m0 + m1) / 6.0;
                b + t * (m0 + t * (m1 - m0) / (2.0 * h))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VolModel {
    Constant {
        sigma0: f64,
    },
    /// `sigma_t = sigma0 exp(alpha W'_t - alpha^2 t / 2)`
    Sabr {
        sigma0: f64,
        alpha: f64,
    },
    /// `sigma_t^2 = sigma0^2 exp(v sqrt(2H) Z_t - v^2 t^{2H} / 2)`
    FractionalBergomi {
        sigma0: f64,
        v: f64,
        hurst: f64,
    },
    /// `sigma_t = f(S_t)`; `spot` is the initial price the model is anchored at.
    LocalVol {
        func: LocalVolFn,
        spot: f64,
    },
}

/// Driver values a model's volatility is a function of. Each model reads
/// only its own fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriverState {
    pub t: f64,
    /// `W'_t`
    pub w_prime: f64,
    /// `Z_t`
    pub z: f64,
    /// `S_t`
    pub spot: f64,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ModelError::Domain(format!("{name} must be positive, got {x}")))
    }
}

impl VolModel {
    pub fn constant(sigma0: f64) -> Result<Self> {
        positive("sigma0", sigma0)?;
        Ok(Self::Constant { sigma0 })
    }

    pub fn sabr(sigma0: f64, alpha: f64) -> Result<Self> {
        positive("sigma0", sigma0)?;
        positive("alpha", alpha)?;
        Ok(Self::Sabr { sigma0, alpha })
    }

    pub fn fractional_bergomi(sigma0: f64, v: f64, hurst: f64) -> Result<Self> {
        positive("sigma0", sigma0)?;
        positive("v", v)?;
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(ModelError::Domain(format!("hurst must lie in (0, 1), got {hurst}")));
        }
        Ok(Self::FractionalBergomi { sigma0, v, hurst })
    }

    pub fn local_vol(func: LocalVolFn, spot: f64) -> Result<Self> {
        if !spot.is_finite() {
            return Err(ModelError::Domain("local vol anchor spot must be finite".into()));
        }
        positive("local vol lower bound", func.lower_bound())?;
        Ok(Self::LocalVol { func, spot })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { sigma0 } => Self::constant(*sigma0).map(|_| ()),
            Self::Sabr { sigma0, alpha } => Self::sabr(*sigma0, *alpha).map(|_| ()),
            Self::FractionalBergomi { sigma0, v, hurst } => {
                Self::fractional_bergomi(*sigma0, *v, *hurst).map(|_| ())
            }
            Self::LocalVol { func, spot } => Self::local_vol(func.clone(), *spot).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Sabr { .. } => "sabr",
            Self::FractionalBergomi { .. } => "fbergomi",
            Self::LocalVol { .. } => "localvol",
        }
    }

    /// Spot volatility at time zero.
    pub fn sigma0(&self) -> f64 {
        match self {
            Self::Constant { sigma0 }
            | Self::Sabr { sigma0, .. }
            | Self::FractionalBergomi { sigma0, .. } => *sigma0,
            Self::LocalVol { func, spot } => func.value(*spot),
        }
    }

    /// Vol-of-vol parameter (`alpha` or `v`); zero for models without one.
    pub fn vol_of_vol(&self) -> f64 {
        match self {
            Self::Sabr { alpha, .. } => *alpha,
            Self::FractionalBergomi { v, .. } => *v,
            _ => 0.0,
        }
    }

    /// Copy with a different initial volatility. Local-vol models are
    /// returned unchanged.
    pub fn with_sigma0(&self, sigma0: f64) -> Self {
        let mut m = self.clone();
        match &mut m {
            Self::Constant { sigma0: s }
            | Self::Sabr { sigma0: s, .. }
            | Self::FractionalBergomi { sigma0: s, .. } => *s = sigma0,
            Self::LocalVol { .. } => {}
        }
        m
    }

    /// Hurst exponent governing `E|D_r sigma_u|` near the diagonal.
    pub fn effective_hurst(&self) -> f64 {
        match self {
            Self::FractionalBergomi { hurst, .. } => *hurst,
            _ => 0.5,
        }
    }

    /// `E[D_r^{W'} sigma_u]` for `0 <= r <= u`.
    ///
    /// For local volatility only the leading constant `sigma'(S_0) sigma(S_0)`
    /// is returned; the remaining terms do not contribute to the short-maturity
    /// limits.
    pub fn expected_malliavin_deriv(&self, r: f64, u: f64) -> Result<f64> {
        if !(r >= 0.0 && r <= u) {
            return Err(ModelError::Domain(format!("need 0 <= r <= u, got r={r} u={u}")));
        }
        let h = self.effective_hurst();
        Ok(self.malliavin_smooth_part(u) * (u - r).powf(h - 0.5))
    }

    /// `E[D_r sigma_u] / (u - r)^{H - 1/2}`, a function of `u` only for every
    /// catalogued model.
    pub fn malliavin_smooth_part(&self, u: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Sabr { sigma0, alpha } => alpha * sigma0,
            Self::FractionalBergomi { sigma0, v, hurst } => {
                (-v * v * u.powf(2.0 * hurst) / 8.0).exp() * 0.5 * sigma0 * v * (2.0 * hurst).sqrt()
            }
            Self::LocalVol { func, spot } => func.derivative(*spot) * func.value(*spot),
        }
    }

    /// Volatility evaluated exactly from the driver state.
    pub fn vol_at(&self, state: &DriverState) -> f64 {
        match self {
            Self::Constant { sigma0 } => *sigma0,
            Self::Sabr { sigma0, alpha } => {
                sigma0 * (alpha * state.w_prime - 0.5 * alpha * alpha * state.t).exp()
            }
            Self::FractionalBergomi { sigma0, v, hurst } => {
                let var_exp =
                    v * (2.0 * hurst).sqrt() * state.z - 0.5 * v * v * state.t.powf(2.0 * hurst);
                sigma0 * (0.5 * var_exp).exp()
            }
            Self::LocalVol { func, .. } => func.value(state.spot),
        }
    }
}

/// Pathwise SABR Malliavin derivative `D_r^{W'} sigma_u = alpha sigma_u`, for any `r <= u`.
pub fn pathwise_malliavin_deriv_sabr(sigma_u: f64, alpha: f64) -> f64 {
    alpha * sigma_u
}

/// Covariances of the Riemann-Liouville kernel `Z` on a time grid and of `Z`
/// with the Brownian increments of `W'`.
#[derive(Debug, Clone)]
pub struct KernelCovariance {
    pub hurst: f64,
    pub grid: Vec<f64>,
    /// `Cov(Z_{t_i}, Z_{t_j})`
    pub cov_zz: DMatrix<f64>,
    /// `Cov(Z_{t_i}, W'_{t_j} - W'_{t_{j-1}})` with `t_0 = 0`.
    pub cov_zw: DMatrix<f64>,
}

impl KernelCovariance {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Joint covariance of `(dW'_1, Z_1, dW'_2, Z_2, ...)`.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let dt = self.grid[i] - if i == 0 { 0.0 } else { self.grid[i - 1] };
            c[(2 * i, 2 * i)] = dt;
            for j in 0..n {
                c[(2 * i + 1, 2 * j + 1)] = self.cov_zz[(i, j)];
                c[(2 * i + 1, 2 * j)] = self.cov_zw[(i, j)];
                c[(2 * j, 2 * i + 1)] = self.cov_zw[(i, j)];
            }
        }
        c
    }

    /// Lower Cholesky factor of [`joint_covariance`](Self::joint_covariance).
    /// A singular matrix (e.g. `H = 1/2`, where `Z = W'`) gets one diagonal
    /// jitter of `1e-12 trace / n`.
    pub fn joint_cholesky(&self) -> Result<DMatrix<f64>> {
        let c = self.joint_covariance();
        if let Some(ch) = Cholesky::new(c.clone()) {
            return Ok(ch.l());
        }
        let n = c.nrows();
        let jitter = 1e-12 * c.trace() / n as f64;
        let jittered = c + DMatrix::identity(n, n) * jitter;
        Cholesky::new(jittered)
            .map(|ch| ch.l())
            .ok_or_else(|| ModelError::Numerical("kernel covariance is not factorizable".into()))
    }
}

const PANEL_NODES: usize = 20;
const SERIES_MAX_RATIO: f64 = 0.5;

/// Builds the covariance of the fractional kernel on `grid` (strictly
/// increasing, first point positive).
pub fn build_kernel_covariance(hurst: f64, grid: &[f64]) -> Result<KernelCovariance> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(ModelError::Domain(format!("hurst must lie in (0, 1), got {hurst}")));
    }
    if grid.is_empty() || !(grid[0] > 0.0) || grid.iter().any(|t| !t.is_finite()) {
        return Err(ModelError::Domain("grid must be non-empty, finite and start above 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ModelError::Domain("grid must be strictly increasing".into()));
    }

    let n = grid.len();
    let a = hurst - 0.5;
    let rules = PanelRules {
        singular: GaussJacobi::new(PANEL_NODES, 0.0, a),
        regular: GaussJacobi::legendre(PANEL_NODES),
    };
    let mut cov_zz = DMatrix::zeros(n, n);
    for i in 0..n {
        cov_zz[(i, i)] = grid[i].powf(2.0 * hurst) / (2.0 * hurst);
        for j in i + 1..n {
            let c = kernel_cross_cov(a, grid[i], grid[j], &rules);
            cov_zz[(i, j)] = c;
            cov_zz[(j, i)] = c;
        }
    }

    let hp = hurst + 0.5;
    let mut cov_zw = DMatrix::zeros(n, n);
    for i in 0..n {
        let ti = grid[i];
        for j in 0..n {
            let lo = if j == 0 { 0.0 } else { grid[j - 1] };
            if lo >= ti {
                break;
            }
            let hi = grid[j].min(ti);
            cov_zw[(i, j)] = ((ti - lo).powf(hp) - (ti - hi).powf(hp)) / hp;
        }
    }

    let trace = cov_zz.trace();
    let min_eig = SymmetricEigen::new(cov_zz.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * trace {
        return Err(ModelError::Numerical(format!(
            "kernel covariance not positive semidefinite (min eigenvalue {min_eig})"
        )));
    }

    Ok(KernelCovariance {
        hurst,
        grid: grid.to_vec(),
        cov_zz,
        cov_zw,
    })
}

struct PanelRules {
    singular: GaussJacobi,
    regular: GaussJacobi,
}

/// `int_0^{s} (s-x)^a (t-x)^a dx` for `s < t`.
fn kernel_cross_cov(a: f64, s: f64, t: f64, rules: &PanelRules) -> f64 {
    if a == 0.0 {
        return s;
    }
    let ratio = s / t;
    if ratio <= SERIES_MAX_RATIO {
        // s^{a+1} t^a / (a+1) * 2F1(-a, 1; a+2; s/t); the series converges
        // at least like 2^{-n} in this branch.
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..400 {
            let k = n as f64;
            term *= (k - a) / (a + 2.0 + k) * ratio;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        s.powf(a + 1.0) * t.powf(a) / (a + 1.0) * sum
    } else {
        // near the diagonal the series is slow: substitute x = s - y, i.e.
        // int_0^s y^a (y + gap)^a dy, and integrate on dyadic panels graded
        // towards the endpoint singularity at y = 0.
        let gap = t - s;
        let first = gap.min(s);
        let mut total = rules.singular.integrate(0.0, first, |y| (y + gap).powf(a));
        let mut lo = first;
        while lo < s {
            let hi = (2.0 * lo).min(s);
            total += rules
                .regular
                .integrate(lo, hi, |y| y.powf(a) * (y + gap).powf(a));
            lo = hi;
        }
        total
    }
}
