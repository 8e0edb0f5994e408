//! Option pricing and at-the-money implied-volatility asymptotics under the
//! Bachelier (normal) model with stochastic volatility.
//!
//! - [`bachelier`]: closed-form European and Asian prices, Greeks, implied volatility.
//! - [`models`]: SABR, fractional Bergomi and local-volatility models.
//! - [`mc`]: Monte Carlo paths, price and skew estimators, the decomposition check.
//! - [`asymptotics`]: short-maturity level and skew limits and the linear
//!   implied-volatility approximation.

pub mod asymptotics;
pub mod bachelier;
pub mod mc;
pub mod models;
pub mod normal;
pub mod quadrature;
pub mod rng;

pub use bachelier::{OptionKind, OptionSpec};
pub use mc::{McEstimate, SimConfig};
pub use models::{Correlation, VolModel};
