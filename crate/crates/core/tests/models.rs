use bachelier_sv::models::{pathwise_malliavin_deriv_sabr, DriverState, LocalVolFn, ModelError, VolModel};
use proptest::prelude::*;

#[test]
fn bergomi_derivative_is_continuous_at_half() {
    let (sigma0, v) = (0.3, 0.5);
    for u in [0.01, 0.3, 1.0] {
        let expected = (-v * v * u / 8.0f64).exp() * 0.5 * sigma0 * v;
        let at = VolModel::fractional_bergomi(sigma0, v, 0.5).unwrap();
        assert!((at.expected_malliavin_deriv(0.3 * u, u).unwrap() - expected).abs() <= 1e-12);
        let near = VolModel::fractional_bergomi(sigma0, v, 0.5 - 1e-14).unwrap();
        assert!((near.expected_malliavin_deriv(0.3 * u, u).unwrap() - expected).abs() <= 1e-12);
    }
}

#[test]
fn catalogued_derivatives() {
    let sabr = VolModel::sabr(0.3, 0.5).unwrap();
    assert!((sabr.expected_malliavin_deriv(0.1, 0.7).unwrap() - 0.15).abs() < 1e-15);
    assert_eq!(VolModel::constant(0.3).unwrap().expected_malliavin_deriv(0.0, 1.0).unwrap(), 0.0);
    let rough = VolModel::fractional_bergomi(0.3, 0.5, 0.3).unwrap();
    assert_eq!(rough.expected_malliavin_deriv(0.5, 0.5).unwrap(), f64::INFINITY);
    assert!(matches!(sabr.expected_malliavin_deriv(0.8, 0.7), Err(ModelError::Domain(_))));
    assert!((pathwise_malliavin_deriv_sabr(0.4, 0.5) - 0.2).abs() < 1e-16);
    assert_eq!(pathwise_malliavin_deriv_sabr(0.4, 0.0), 0.0);

    let f = LocalVolFn::tanh(0.3, 0.1, 10.0, 2.0).unwrap();
    let lv = VolModel::local_vol(f.clone(), 10.5).unwrap();
    let expected = f.derivative(10.5) * f.value(10.5);
    assert!((lv.expected_malliavin_deriv(0.0, 0.2).unwrap() - expected).abs() < 1e-16);
}

#[test]
fn effective_hurst() {
    assert_eq!(VolModel::sabr(0.3, 0.5).unwrap().effective_hurst(), 0.5);
    assert_eq!(VolModel::constant(0.3).unwrap().effective_hurst(), 0.5);
    assert_eq!(VolModel::fractional_bergomi(0.3, 0.5, 0.4).unwrap().effective_hurst(), 0.4);
}

#[test]
fn vol_at_driver_values() {
    let state = DriverState {
        t: 0.5,
        ..Default::default()
    };
    let sabr = VolModel::sabr(0.3, 0.5).unwrap();
    assert!((sabr.vol_at(&state) - 0.3 * (-0.0625f64).exp()).abs() < 1e-15);
    let rough = VolModel::fractional_bergomi(0.3, 0.5, 0.4).unwrap();
    let expected = 0.3 * (-0.25 * 0.25 * 0.5f64.powf(0.8)).exp();
    assert!((rough.vol_at(&state) - expected).abs() < 1e-15);
}

#[test]
fn table_local_vol() {
    let f = LocalVolFn::table(&[(8.0, 0.4), (10.0, 0.3), (12.0, 0.25)]).unwrap();
    assert!((f.value(10.0) - 0.3).abs() < 1e-15);
    assert_eq!(f.value(20.0), 0.25);
    assert!(f.derivative(10.0) < 0.0);
    assert!(LocalVolFn::table(&[(8.0, 0.4), (10.0, -0.3), (12.0, 0.25)]).is_err());
}

proptest! {
    #[test]
    fn bergomi_derivative_is_bounded_by_kernel(
        hurst in 0.05f64..0.95,
        v in 0.1f64..2.0,
        r_frac in 0.0f64..0.999,
        u in 1e-4f64..1.0,
    ) {
        let sigma0 = 0.3;
        let model = VolModel::fractional_bergomi(sigma0, v, hurst).unwrap();
        let r = r_frac * u;
        let d = model.expected_malliavin_deriv(r, u).unwrap();
        let bound = 0.5 * sigma0 * v * (2.0 * hurst).sqrt() * (u - r).powf(hurst - 0.5);
        prop_assert!(d > 0.0 && d <= bound * (1.0 + 1e-15));
    }
}
