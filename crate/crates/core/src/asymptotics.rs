//! Short-maturity limits of the at-the-money implied volatility level and
//! skew, and the linear implied-volatility approximation built on them.
//!
//! For a model with `E[D_r^{W'} sigma_u] = g(u) (u - r)^{H - 1/2}` the skews
//! are
//!
//! ```text
//! European: T^{max(1/2-H,0)} rho / (sigma0 T^2) int_0^T int_r^T E[D_r sigma_u] du dr
//! Asian:    T^{max(1/2-H,0)} 9 rho / (sigma0 T^5) int_0^T (T-r) int_r^T (T-u)^2 E[D_r sigma_u] du dr
//! ```
//!
//! and converge to the closed forms returned by [`skew_limit_closed`] as
//! `T -> 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bachelier::{self, OptionKind, OptionSpec, PricingError};
use crate::models::{Correlation, ModelError, VolModel};
use crate::quadrature::GaussJacobi;

const PANEL_NODES: usize = 16;
const GRADED_PANELS: usize = 30;
const QUADRATURE_RTOL: f64 = 1e-9;
/// Floor applied to a non-positive approximated volatility.
pub const IV_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("quadrature did not converge: estimates {coarse} and {fine} differ by {achieved:.3e} (relative)")]
    NotConverged { coarse: f64, fine: f64, achieved: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

pub type Result<T> = std::result::Result<T, AsymptoticsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `H = 1/2`: the raw skew has a finite limit.
    FiniteLimit,
    /// `H > 1/2`: the raw skew tends to zero.
    Vanishing,
    /// `H < 1/2`: the raw skew blows up, `T^{1/2-H}` times it converges.
    BlowupScaled,
}

impl Regime {
    pub fn from_hurst(hurst: f64) -> Self {
        if hurst < 0.5 {
            Regime::BlowupScaled
        } else if hurst > 0.5 {
            Regime::Vanishing
        } else {
            Regime::FiniteLimit
        }
    }
}

/// Short-maturity ATM skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewLimit {
    pub kind: OptionKind,
    /// Skew scaled by `T^{max(1/2-H,0)}`; for closed forms, its `T -> 0` limit.
    pub value: f64,
    pub hurst: f64,
    pub regime: Regime,
    /// Leading-order coefficient `c` in `skew ~ c T^{H-1/2}`.
    pub coefficient: f64,
}

impl SkewLimit {
    /// Leading-order unscaled skew at maturity `T`.
    pub fn raw_slope(&self, maturity: f64) -> f64 {
        if self.regime == Regime::FiniteLimit {
            self.value
        } else {
            self.coefficient * maturity.powf(self.hurst - 0.5)
        }
    }
}

/// Which numerator to use in the Asian `H < 1/2` coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsianCoefficient {
    /// `144`, consistent with the generic integral and the `H = 1/2` value.
    #[default]
    Derived,
    /// `288`, kept for comparison only.
    Printed,
}

impl AsianCoefficient {
    fn numerator(self) -> f64 {
        match self {
            AsianCoefficient::Derived => 144.0,
            AsianCoefficient::Printed => 288.0,
        }
    }
}

/// `lim_{T -> 0} I(0, k*)`: the spot volatility at time zero.
pub fn level_limit(model: &VolModel) -> f64 {
    model.sigma0()
}

/// Leading-order skew coefficient for a kernel `E[D_r sigma_u] =
/// (sigma0 v sqrt(2H) / 2) (u - r)^{H - 1/2}`:
///
/// European `2 rho v sqrt(2H) / ((2H+1)(2H+3))`,
/// Asian `144 rho v sqrt(2H) / ((2H+1)(2H+3)(2H+5)(2H+9))`.
pub fn bergomi_skew_coefficient(kind: OptionKind, v: f64, rho: f64, hurst: f64, asian: AsianCoefficient) -> f64 {
    let h2 = 2.0 * hurst;
    let scale = rho * v * h2.sqrt();
    match kind {
        OptionKind::European => 2.0 * scale / ((h2 + 1.0) * (h2 + 3.0)),
        OptionKind::Asian => {
            asian.numerator() * scale / ((h2 + 1.0) * (h2 + 3.0) * (h2 + 5.0) * (h2 + 9.0))
        }
    }
}

/// Closed-form skew limits for the catalogued models.
///
/// Local volatility is driven by the price's own Brownian motion, so `rho`
/// is ignored and the limits are `sigma'(S_0)/2` and `3 sigma'(S_0)/5`.
pub fn skew_limit_closed(kind: OptionKind, model: &VolModel, rho: Correlation) -> Result<SkewLimit> {
    skew_limit_closed_with(kind, model, rho, AsianCoefficient::Derived)
}

/// [`skew_limit_closed`] with a choice of Asian coefficient.
pub fn skew_limit_closed_with(
    kind: OptionKind,
    model: &VolModel,
    rho: Correlation,
    asian: AsianCoefficient,
) -> Result<SkewLimit> {
    model.validate()?;
    let weight = match kind {
        OptionKind::European => 0.5,
        OptionKind::Asian => 0.6,
    };
    let finite = |value: f64| SkewLimit {
        kind,
        value,
        hurst: 0.5,
        regime: Regime::FiniteLimit,
        coefficient: value,
    };
    Ok(match model {
        VolModel::Constant { .. } => finite(0.0),
        VolModel::Sabr { alpha, .. } => finite(weight * rho.value() * alpha),
        VolModel::LocalVol { func, spot } => finite(weight * func.derivative(*spot)),
        VolModel::FractionalBergomi { v, hurst, .. } => {
            let coefficient = bergomi_skew_coefficient(kind, *v, rho.value(), *hurst, asian);
            let regime = Regime::from_hurst(*hurst);
            SkewLimit {
                kind,
                value: if regime == Regime::Vanishing { 0.0 } else { coefficient },
                hurst: *hurst,
                regime,
                coefficient,
            }
        }
    })
}

/// Skew at maturity `T` from the defining double integral of the model's
/// `E[D_r^{W'} sigma_u]`, scaled by `T^{max(1/2-H,0)}`.
pub fn skew_limit_quadrature(kind: OptionKind, model: &VolModel, rho: Correlation, maturity: f64) -> Result<SkewLimit> {
    model.validate()?;
    let (rho, coefficient) = match model {
        VolModel::LocalVol { .. } => (1.0, skew_limit_closed(kind, model, rho)?.coefficient),
        _ => (rho.value(), skew_limit_closed(kind, model, rho)?.coefficient),
    };
    let hurst = model.effective_hurst();
    let value = skew_quadrature(kind, rho, model.sigma0(), hurst, maturity, |_, u| {
        model.malliavin_smooth_part(u)
    })?;
    Ok(SkewLimit {
        kind,
        value,
        hurst,
        regime: Regime::from_hurst(hurst),
        coefficient,
    })
}

/// Generic evaluator for `E[D_r sigma_u] = smooth(r, u) (u - r)^{H - 1/2}`.
///
/// Both integrals run over dyadic panels, refined towards `r = 0` and
/// `r = T` in the outer integral and towards `u = r` in the inner one. The last inner panel carries the `(u - r)^{H - 1/2}`
/// factor in a Gauss-Jacobi weight, the others Gauss-Legendre. The result is
/// accepted when 8- and 16-node panels agree to a relative `1e-9`.
pub fn skew_quadrature<F>(kind: OptionKind, rho: f64, sigma0: f64, hurst: f64, maturity: f64, smooth: F) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(AsymptoticsError::Domain(format!("maturity must be positive, got {maturity}")));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(AsymptoticsError::Domain(format!("hurst must lie in (0, 1), got {hurst}")));
    }
    if !(sigma0 > 0.0) {
        return Err(AsymptoticsError::Domain(format!("sigma0 must be positive, got {sigma0}")));
    }
    let coarse = double_integral(kind, hurst, maturity, PANEL_NODES / 2, &smooth);
    let fine = double_integral(kind, hurst, maturity, PANEL_NODES, &smooth);
    let achieved = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if fine != coarse && achieved > QUADRATURE_RTOL {
        return Err(AsymptoticsError::NotConverged { coarse, fine, achieved });
    }
    let t = maturity;
    let prefactor = match kind {
        OptionKind::European => rho / (sigma0 * t * t),
        OptionKind::Asian => 9.0 * rho / (sigma0 * t.powi(5)),
    };
    let scaling = if hurst < 0.5 { t.powf(0.5 - hurst) } else { 1.0 };
    Ok(scaling * prefactor * fine)
}

struct GradedRule {
    singular: GaussJacobi,
    regular: GaussJacobi,
    exponent: f64,
}

impl GradedRule {
    fn new(nodes: usize, exponent: f64) -> Self {
        Self {
            singular: GaussJacobi::new(nodes, 0.0, exponent),
            regular: GaussJacobi::legendre(nodes),
            exponent,
        }
    }

    /// `int_0^len x^exponent f(x) dx` on dyadic panels refined towards `x = 0`.
    fn integrate<F: FnMut(f64) -> f64>(&self, len: f64, mut f: F) -> f64 {
        let mut total = 0.0;
        let mut hi = len;
        for _ in 0..GRADED_PANELS {
            let lo = 0.5 * hi;
            total += self.regular.integrate(lo, hi, |x| x.powf(self.exponent) * f(x));
            hi = lo;
        }
        total + self.singular.integrate(0.0, hi, f)
    }

    /// `int_0^len f(x) dx` refined towards both ends; `exponent` must be 0.
    fn integrate_two_sided<F: FnMut(f64) -> f64>(&self, len: f64, mut f: F) -> f64 {
        let half = 0.5 * len;
        self.integrate(half, &mut f) + self.integrate(half, |x| f(len - x))
    }
}

fn double_integral<F>(kind: OptionKind, hurst: f64, t: f64, nodes: usize, smooth: &F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let outer = GradedRule::new(nodes, 0.0);
    let inner = GradedRule::new(nodes, hurst - 0.5);
    // the outer integrand is non-smooth at both r = 0 and r = T
    outer.integrate_two_sided(t, |r| {
        let inside = inner.integrate(t - r, |x| {
            let u = r + x;
            match kind {
                OptionKind::European => smooth(r, u),
                OptionKind::Asian => (t - u) * (t - u) * smooth(r, u),
            }
        });
        match kind {
            OptionKind::European => inside,
            OptionKind::Asian => (t - r) * inside,
        }
    })
}

/// Linear implied-volatility approximation around the ATM strike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvApprox {
    pub level: f64,
    pub slope: f64,
    pub anchor_strike: f64,
    pub maturity: f64,
}

impl IvApprox {
    pub fn iv(&self, strike: f64) -> f64 {
        self.level + self.slope * (strike - self.anchor_strike)
    }
}

/// Builds the approximation `I(k) = sigma0 + slope(T) (k - k*)` at
/// inception, where `k* = S_0` and `slope(T)` is the closed-form limit for
/// `H = 1/2` and `coefficient * T^{H-1/2}` otherwise.
pub fn linear_approx(kind: OptionKind, model: &VolModel, rho: Correlation, spot: f64, maturity: f64) -> Result<IvApprox> {
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(AsymptoticsError::Domain(format!("maturity must be positive, got {maturity}")));
    }
    let limit = skew_limit_closed(kind, model, rho)?;
    Ok(IvApprox {
        level: level_limit(model),
        slope: limit.raw_slope(maturity),
        anchor_strike: spot,
        maturity,
    })
}

/// Approximated implied volatility at strike `k`.
pub fn iv_linear_approx(
    kind: OptionKind,
    model: &VolModel,
    rho: Correlation,
    spot: f64,
    strike: f64,
    maturity: f64,
) -> Result<f64> {
    Ok(linear_approx(kind, model, rho, spot, maturity)?.iv(strike))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxPrice {
    pub price: f64,
    /// Volatility the price was evaluated at.
    pub iv: f64,
    /// Set when the linear approximation was not positive and [`IV_FLOOR`] was used.
    pub floored: bool,
}

/// Bachelier price of `spec` (at inception) at the approximated implied volatility.
pub fn price_via_approx(model: &VolModel, rho: Correlation, spec: &OptionSpec) -> Result<ApproxPrice> {
    spec.validate()?;
    if spec.t != 0.0 {
        return Err(AsymptoticsError::Domain("approximation is anchored at t = 0".into()));
    }
    let iv = iv_linear_approx(spec.kind, model, rho, spec.spot, spec.strike, spec.maturity)?;
    let floored = !(iv > 0.0);
    let iv = if floored { IV_FLOOR } else { iv };
    Ok(ApproxPrice {
        price: bachelier::price(spec, iv)?,
        iv,
        floored,
    })
}
