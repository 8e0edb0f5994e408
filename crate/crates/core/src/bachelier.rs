//! Closed-form Bachelier (normal model) pricing for European and arithmetic
//! Asian calls under constant volatility, with Greeks and implied-volatility
//! inversion.
//!
//! Volatility is a *normal* volatility: currency units per square-root year,
//! never a fraction of spot. Negative spots and strikes are accepted. Interest
//! rates are zero throughout.
//!
//! An Asian call with running integral `y_t = int_0^t S_u du` is priced as a
//! European call on the martingale `M_t = S_t (T-t)/T + y_t/T` with the
//! equivalent volatility `sigma (T-t) / (T sqrt 3)`; both kinds share one
//! pricing kernel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::{self, sqrt_2pi};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const MAX_IV_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("price {price} is not above the intrinsic value {intrinsic}")]
    NoSolution { price: f64, intrinsic: f64 },
    #[error("implied volatility did not converge after {iterations} iterations, bracket [{lo}, {hi}]")]
    NotConverged { lo: f64, hi: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, PricingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    European,
    Asian,
}

impl OptionKind {
    pub fn name(self) -> &'static str {
        match self {
            OptionKind::European => "european",
            OptionKind::Asian => "asian",
        }
    }
}

/// Fixed-strike call contract observed at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub spot: f64,
    pub strike: f64,
    /// Valuation time in years.
    pub t: f64,
    /// Maturity in years.
    pub maturity: f64,
    /// Accumulated price integral `int_0^t S_u du`; only meaningful for Asians.
    pub running_integral: f64,
}

impl OptionSpec {
    pub fn new(
        kind: OptionKind,
        spot: f64,
        strike: f64,
        t: f64,
        maturity: f64,
        running_integral: f64,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            spot,
            strike,
            t,
            maturity,
            running_integral,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Contract valued at inception.
    pub fn at_inception(kind: OptionKind, spot: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::new(kind, spot, strike, 0.0, maturity, 0.0)
    }

    pub fn european(spot: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::at_inception(OptionKind::European, spot, strike, maturity)
    }

    pub fn asian(spot: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::at_inception(OptionKind::Asian, spot, strike, maturity)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.spot,
            self.strike,
            self.t,
            self.maturity,
            self.running_integral,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !all_finite {
            return Err(PricingError::Domain("non-finite contract input".into()));
        }
        if !(self.t >= 0.0 && self.maturity > self.t) {
            return Err(PricingError::Domain(format!(
                "need 0 <= t < T, got t={} T={}",
                self.t, self.maturity
            )));
        }
        if self.t == 0.0 && self.running_integral != 0.0 {
            return Err(PricingError::Domain(
                "running integral must be zero at t = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn with_strike(&self, strike: f64) -> Self {
        Self { strike, ..*self }
    }

    pub fn with_kind(&self, kind: OptionKind) -> Self {
        Self { kind, ..*self }
    }

    pub fn time_to_expiry(&self) -> f64 {
        self.maturity - self.t
    }

    /// Expected payoff underlying: `S_t` for Europeans, `M_t = E_t(A_T)` for Asians.
    pub fn forward(&self) -> f64 {
        match self.kind {
            OptionKind::European => self.spot,
            OptionKind::Asian => {
                self.spot * (self.time_to_expiry() / self.maturity)
                    + self.running_integral / self.maturity
            }
        }
    }

    /// At-the-money strike `k*_t`.
    pub fn atm_strike(&self) -> f64 {
        self.forward()
    }

    /// Volatility of the equivalent European call on [`forward`](Self::forward).
    pub fn equivalent_european_vol(&self, sigma: f64) -> f64 {
        match self.kind {
            OptionKind::European => sigma,
            OptionKind::Asian => sigma * self.time_to_expiry() / (self.maturity * SQRT_3),
        }
    }

    /// Terminal standard deviation per unit of volatility.
    pub fn vol_scale(&self) -> f64 {
        self.equivalent_european_vol(1.0) * self.time_to_expiry().sqrt()
    }

    pub fn intrinsic(&self) -> f64 {
        (self.forward() - self.strike).max(0.0)
    }

    pub fn moneyness(&self, sigma: f64) -> Moneyness {
        Moneyness((self.forward() - self.strike) / self.stdev(sigma))
    }

    fn stdev(&self, sigma: f64) -> f64 {
        self.equivalent_european_vol(sigma) * self.time_to_expiry().sqrt()
    }
}

/// Standardized moneyness `d`; zero exactly at the ATM strike.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Moneyness(pub f64);

/// A price together with the volatility that produces it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub price: f64,
    pub vol: f64,
}

impl Quote {
    pub fn from_vol(spec: &OptionSpec, vol: f64) -> Result<Self> {
        Ok(Self {
            price: price(spec, vol)?,
            vol,
        })
    }

    pub fn from_price(spec: &OptionSpec, price: f64) -> Result<Self> {
        Ok(Self {
            price,
            vol: implied_vol(spec, price)?,
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(PricingError::Domain(format!(
            "volatility must be positive and finite, got {sigma}"
        )))
    }
}

/// `E(m + s Z)_+` for standard normal `Z`.
#[inline]
fn normal_call(m: f64, stdev: f64) -> f64 {
    let d = m / stdev;
    m * normal::cdf(d) + stdev * normal::pdf(d)
}

/// Bachelier call price for any contract kind.
pub fn price(spec: &OptionSpec, sigma: f64) -> Result<f64> {
    spec.validate()?;
    check_sigma(sigma)?;
    Ok(normal_call(spec.forward() - spec.strike, spec.stdev(sigma)))
}

/// Classical Bachelier European call `B_E(t, S, k, sigma)`.
pub fn price_european(t: f64, spot: f64, strike: f64, sigma: f64, maturity: f64) -> Result<f64> {
    let spec = OptionSpec::new(OptionKind::European, spot, strike, t, maturity, 0.0)?;
    price(&spec, sigma)
}

/// Arithmetic Asian call `B_A(t, S, y, k, sigma)`.
pub fn price_asian(
    t: f64,
    spot: f64,
    running_integral: f64,
    strike: f64,
    sigma: f64,
    maturity: f64,
) -> Result<f64> {
    let spec = OptionSpec::new(OptionKind::Asian, spot, strike, t, maturity, running_integral)?;
    price(&spec, sigma)
}

/// `d price / d sigma`.
pub fn vega(spec: &OptionSpec, sigma: f64) -> Result<f64> {
    spec.validate()?;
    check_sigma(sigma)?;
    Ok(spec.vol_scale() * normal::pdf(spec.moneyness(sigma).0))
}

/// `d price / d strike`, equal to `-N(d)`.
pub fn dual_delta(spec: &OptionSpec, sigma: f64) -> Result<f64> {
    spec.validate()?;
    check_sigma(sigma)?;
    Ok(-normal::cdf(spec.moneyness(sigma).0))
}

/// Half the third spot derivative of the European price at time `s`:
/// `-d n(d) / (2 sigma^2 (T - s))`.
pub fn h_kernel(s: f64, x: f64, strike: f64, sigma: f64, maturity: f64) -> Result<f64> {
    let spec = OptionSpec::new(OptionKind::European, x, strike, s, maturity, 0.0)?;
    check_sigma(sigma)?;
    let d = spec.moneyness(sigma).0;
    Ok(-0.5 * d * normal::pdf(d) / (sigma * sigma * spec.time_to_expiry()))
}

/// Implied normal volatility of a call price.
///
/// At the ATM strike the inversion is the closed form `price sqrt(2 pi) /
/// vol_scale`. Elsewhere a safeguarded Newton iteration on the terminal
/// standard deviation runs inside a bracket that is widened by doubling
/// until it contains the root; steps leaving the bracket fall back to
/// bisection.
pub fn implied_vol(spec: &OptionSpec, target: f64) -> Result<f64> {
    spec.validate()?;
    if !target.is_finite() {
        return Err(PricingError::Domain(format!("non-finite price {target}")));
    }
    let m = spec.forward() - spec.strike;
    let intrinsic = m.max(0.0);
    if target <= intrinsic {
        return Err(PricingError::NoSolution {
            price: target,
            intrinsic,
        });
    }
    let scale = spec.vol_scale();
    if m == 0.0 {
        return Ok(target * sqrt_2pi() / scale);
    }

    let residual = |s: f64| normal_call(m, s) - target;
    // E(m + sZ)_+ <= intrinsic + s n(0), so this is a lower bound on the root.
    let mut lo = (target - intrinsic) * sqrt_2pi();
    if residual(lo) > 0.0 {
        // only possible through rounding right at the boundary
        lo *= 0.5;
    }
    let mut hi = lo.max(f64::MIN_POSITIVE) * 2.0;
    let mut widenings = 0;
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        widenings += 1;
        if widenings > 2000 || !hi.is_finite() {
            return Err(PricingError::NotConverged {
                lo: lo / scale,
                hi: hi / scale,
                iterations: widenings,
            });
        }
    }

    // convex increasing in s: Newton from the right converges monotonically
    let mut s = hi;
    for _ in 0..MAX_IV_ITERATIONS {
        let f = residual(s);
        if f == 0.0 {
            return Ok(s / scale);
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = normal::pdf(m / s);
        let newton = s - f / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 2.0 * f64::EPSILON * s || hi - lo <= 2.0 * f64::EPSILON * hi {
            let sigma = next / scale;
            return finish(spec, target, sigma, lo / scale, hi / scale);
        }
        s = next;
    }
    Err(PricingError::NotConverged {
        lo: lo / scale,
        hi: hi / scale,
        iterations: MAX_IV_ITERATIONS,
    })
}

fn finish(spec: &OptionSpec, target: f64, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    let err = (price(spec, sigma)? - target).abs();
    if err <= 1e-12 * target.max(1.0) {
        Ok(sigma)
    } else {
        Err(PricingError::NotConverged {
            lo,
            hi,
            iterations: MAX_IV_ITERATIONS,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn atm_prices_are_closed_form() {
        let sigma = 0.7;
        let t = 0.25;
        let e = price_european(0.0, 3.0, 3.0, sigma, t).unwrap();
        assert!((e / (sigma * (t / (2.0 * PI)).sqrt()) - 1.0).abs() < 1e-15);
        let a = price_asian(0.0, 3.0, 0.0, 3.0, sigma, t).unwrap();
        assert!((a / (sigma * (t / (6.0 * PI)).sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_vol_tends_to_intrinsic() {
        let p = price_european(0.0, 10.0, 9.5, 1e-9, 1.0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let p = price_european(0.0, 9.5, 10.0, 1e-9, 1.0).unwrap();
        assert!(p.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(price_european(0.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(price_european(1.0, 1.0, 1.0, 0.2, 1.0).is_err());
        assert!(price_european(0.0, f64::NAN, 1.0, 0.2, 1.0).is_err());
        assert!(price_asian(0.0, 1.0, 0.3, 1.0, 0.2, 1.0).is_err());
        assert!(h_kernel(2.0, 1.0, 1.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn negative_prices_accepted() {
        let p = price_european(0.0, -2.0, -2.5, 1.0, 1.0).unwrap();
        assert!(p > 0.5);
    }

    #[test]
    fn dual_delta_limits() {
        let spec = OptionSpec::european(10.0, 10.0, 0.5).unwrap();
        assert_eq!(dual_delta(&spec, 0.3).unwrap(), -0.5);
        let spec = OptionSpec::asian(10.0, 10.0, 0.5).unwrap();
        assert_eq!(dual_delta(&spec, 0.3).unwrap(), -0.5);
        let deep_itm = OptionSpec::european(10.0, -1e6, 0.5).unwrap();
        assert_eq!(dual_delta(&deep_itm, 0.3).unwrap(), -1.0);
        let deep_otm = OptionSpec::european(10.0, 1e6, 0.5).unwrap();
        assert_eq!(dual_delta(&deep_otm, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn atm_vega_values() {
        let e = OptionSpec::european(5.0, 5.0, 1.0).unwrap();
        assert!((vega(&e, 0.4).unwrap() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let a = OptionSpec::asian(5.0, 5.0, 1.0).unwrap();
        assert!((vega(&a, 0.4).unwrap() - 1.0 / (6.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn h_kernel_sign_and_zero() {
        assert_eq!(h_kernel(0.0, 1.0, 1.0, 0.3, 1.0).unwrap(), 0.0);
        assert!(h_kernel(0.0, 1.1, 1.0, 0.3, 1.0).unwrap() < 0.0);
        assert!(h_kernel(0.0, 0.9, 1.0, 0.3, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn implied_vol_edge_cases() {
        let spec = OptionSpec::european(10.0, 9.0, 1.0).unwrap();
        assert!(matches!(
            implied_vol(&spec, 1.0),
            Err(PricingError::NoSolution { .. })
        ));
        assert!(implied_vol(&spec, 0.5).is_err());
        let atm = OptionSpec::european(10.0, 10.0, 0.04).unwrap();
        let p = 0.123;
        assert_eq!(
            implied_vol(&atm, p).unwrap(),
            p * sqrt_2pi() / 0.04f64.sqrt()
        );
    }

    #[test]
    fn asian_atm_inversion_closed_form() {
        let atm = OptionSpec::asian(10.0, 10.0, 0.75).unwrap();
        let p = 0.05;
        let iv = implied_vol(&atm, p).unwrap();
        assert!((iv / (p * (6.0 * PI / 0.75).sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn running_integral_shifts_atm_strike() {
        let spec = OptionSpec::new(OptionKind::Asian, 10.0, 0.0, 0.5, 1.0, 4.0).unwrap();
        assert!((spec.atm_strike() - 9.0).abs() < 1e-15);
        assert_eq!(spec.with_strike(spec.atm_strike()).moneyness(0.3).0, 0.0);
    }
}
