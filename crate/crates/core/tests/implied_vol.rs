use bachelier_sv::bachelier::{implied_vol, price, OptionSpec, PricingError};
use proptest::prelude::*;

fn spec_for(kind_asian: bool, sigma: f64, d: f64, maturity: f64) -> OptionSpec {
    let spot = 10.0;
    let scale = if kind_asian { (maturity / 3.0).sqrt() } else { maturity.sqrt() };
    let strike = spot - d * sigma * scale;
    if kind_asian {
        OptionSpec::asian(spot, strike, maturity).unwrap()
    } else {
        OptionSpec::european(spot, strike, maturity).unwrap()
    }
}

struct Worst {
    vol_error: f64,
    price_residual: f64,
    at: (f64, f64),
}

/// Scans sigma in [1e-3, 5] (log grid) and |d| <= max_d.
fn scan(asian: bool, max_d: f64) -> Worst {
    let mut worst = Worst {
        vol_error: 0.0,
        price_residual: 0.0,
        at: (0.0, 0.0),
    };
    for i in 0..=40 {
        let sigma = 1e-3 * (5.0f64 / 1e-3).powf(i as f64 / 40.0);
        for j in 0..=48 {
            let d = max_d * (-1.0 + 2.0 * j as f64 / 48.0);
            let spec = spec_for(asian, sigma, d, 0.5);
            let p = price(&spec, sigma).unwrap();
            let iv = implied_vol(&spec, p).unwrap();
            let residual = (price(&spec, iv).unwrap() - p).abs() / p.max(1.0);
            worst.price_residual = worst.price_residual.max(residual);
            if (iv - sigma).abs() > worst.vol_error {
                worst.vol_error = (iv - sigma).abs();
                worst.at = (sigma, d);
            }
        }
    }
    worst
}

#[test]
fn inversion_reproduces_price_on_wide_grid() {
    for asian in [false, true] {
        let w = scan(asian, 6.0);
        assert!(w.price_residual <= 1e-12, "residual {:e}", w.price_residual);
    }
}

#[test]
fn round_trip_moderate_moneyness() {
    for asian in [false, true] {
        let w = scan(asian, 4.0);
        assert!(w.vol_error <= 1e-9, "error {:e} at {:?}", w.vol_error, w.at);
    }
}

#[test]
fn round_trip_documented_points() {
    for sigma in [0.05, 0.3, 1.4] {
        for k in [9.95, 9.99, 10.0, 10.03] {
            let spec = OptionSpec::european(10.0, k, 0.25).unwrap();
            let iv = implied_vol(&spec, price(&spec, sigma).unwrap()).map_err(|e| format!("{e} sigma={sigma} k={k}")).unwrap();
            assert!((iv - sigma).abs() < 1e-10);
        }
    }
}

#[test]
fn atm_inversion_is_exact_closed_form() {
    let t = 0.37;
    let spec = OptionSpec::european(3.0, 3.0, t).unwrap();
    let p = 0.123;
    let expected = p * (2.0 * std::f64::consts::PI / t).sqrt();
    assert!((implied_vol(&spec, p).unwrap() / expected - 1.0).abs() < 1e-15);
    let spec = spec.with_kind(bachelier_sv::OptionKind::Asian);
    let expected = p * (6.0 * std::f64::consts::PI / t).sqrt();
    assert!((implied_vol(&spec, p).unwrap() / expected - 1.0).abs() < 1e-15);
}

#[test]
fn prices_at_or_below_intrinsic_have_no_solution() {
    let spec = OptionSpec::european(10.0, 9.0, 1.0).unwrap();
    assert!(matches!(implied_vol(&spec, 1.0), Err(PricingError::NoSolution { .. })));
    assert!(matches!(implied_vol(&spec, 0.5), Err(PricingError::NoSolution { .. })));
    let otm = OptionSpec::european(10.0, 11.0, 1.0).unwrap();
    assert!(matches!(implied_vol(&otm, 0.0), Err(PricingError::NoSolution { .. })));
}

proptest! {
    #[test]
    fn round_trip_relative(
        log_sigma in (1e-4f64).ln()..(10.0f64).ln(),
        d in -3.0f64..3.0,
        maturity in 0.01f64..5.0,
        asian in any::<bool>(),
    ) {
        let sigma = log_sigma.exp();
        let spec = spec_for(asian, sigma, d, maturity);
        let p = price(&spec, sigma).unwrap();
        let iv = implied_vol(&spec, p).unwrap();
        prop_assert!((iv / sigma - 1.0).abs() <= 1e-9, "sigma={} d={} iv={}", sigma, d, iv);
    }

    #[test]
    fn price_increasing_in_vol(
        sigma in 0.01f64..3.0,
        bump in 1e-3f64..0.5,
        k in 5.0f64..15.0,
        maturity in 0.01f64..3.0,
    ) {
        let spec = OptionSpec::european(10.0, k, maturity).unwrap();
        let d = ((10.0 - k) / (sigma * maturity.sqrt())).abs();
        prop_assume!(d < 8.0);
        prop_assert!(price(&spec, sigma + bump).unwrap() > price(&spec, sigma).unwrap());
    }
}
