use std::f64::consts::TAU;

use hcf_core::probe::{convergence_probe, ProbeField, DEFAULT_RESOLUTIONS};
use hcf_core::symbolic::TrigPoly;
use hcf_core::tensor::{Slot, TensorField};
use hcf_core::{DerivativeMode, HcfError, TorusGrid};
use num_complex::Complex64;
use proptest::prelude::*;

const BOTH: [DerivativeMode; 2] = [DerivativeMode::Spectral, DerivativeMode::CentralDifference4];

fn random_poly(n: usize, coeffs: &[(i32, i32, f64, f64)]) -> TrigPoly {
    let periods = vec![TAU; 2 * n];
    let mut p = TrigPoly::zero(&periods);
    for (j, &(kx, ky, re, im)) in coeffs.iter().enumerate() {
        let mut k = vec![0; 2 * n];
        k[(2 * j) % (2 * n)] = kx;
        k[(2 * j + 1) % (2 * n)] = ky;
        p = p.add(&TrigPoly::mode(&periods, &k, Complex64::new(re, im)));
    }
    p
}

#[test]
fn constant_has_zero_derivative() {
    for mode in BOTH {
        let grid = TorusGrid::periodic(2, 8, mode).unwrap();
        let f = TensorField::scalar(&grid, vec![Complex64::new(3.0, -1.0); grid.num_points()]).unwrap();
        for a in 0..2 {
            assert_eq!(f.partial_holo(a).unwrap().max_abs(), 0.0);
            assert_eq!(f.partial_anti(a).unwrap().max_abs(), 0.0);
        }
    }
}

#[test]
fn exponential_derivatives_are_exact_in_spectral_mode() {
    let grid = TorusGrid::periodic(1, 16, DerivativeMode::Spectral).unwrap();
    let f = TensorField::scalar(&grid, grid.sample(|x| Complex64::from_polar(1.0, x[0]))).unwrap();
    let expect = f.scale(Complex64::new(0.0, 0.5));
    assert!(f.partial_holo(0).unwrap().max_diff(&expect).unwrap() < 1e-14);
    assert!(f.partial_anti(0).unwrap().max_diff(&expect).unwrap() < 1e-14);
}

#[test]
fn antiholomorphic_surrogate_matches_symbolic_derivative() {
    // sin x¹ − i sin y¹
    let periods = vec![TAU; 2];
    let f = TrigPoly::sin(&periods, 0, 1, 1.0, 0.0).sub(&TrigPoly::sin(&periods, 1, 1, 1.0, 0.0).scale(Complex64::new(0.0, 1.0)));
    let grid = TorusGrid::periodic(1, 32, DerivativeMode::Spectral).unwrap();
    let field = TensorField::scalar(&grid, f.sample(&grid)).unwrap();
    let d = field.partial_holo(0).unwrap();
    for p in 0..grid.num_points() {
        let x = grid.coordinates(p);
        // ½(cos x) − (i/2)(−i cos y) = ½(cos x − cos y)
        let expect = 0.5 * (x[0].cos() - x[1].cos());
        assert!((d.data()[p] - Complex64::new(expect, 0.0)).norm() <= 1e-10);
    }
}

#[test]
fn partial_rejects_axis_out_of_range() {
    let grid = TorusGrid::periodic(1, 8, DerivativeMode::Spectral).unwrap();
    let f = TensorField::zeros(&grid, &[Slot::LOWER_HOLO]);
    assert!(matches!(f.partial_holo(1), Err(HcfError::AxisOutOfRange { .. })));
}

#[test]
fn probe_shows_fourth_order_and_spectral_accuracy() {
    let periods = vec![TAU; 2];
    let f = ProbeField::Symbolic(TrigPoly::sin(&periods, 0, 1, 1.0, 0.0).mul(&TrigPoly::cos(&periods, 1, 1, 1.0, 0.0)));
    let table = convergence_probe(&f, 1, &DEFAULT_RESOLUTIONS, &BOTH).unwrap();
    let orders = table.observed_orders(DerivativeMode::CentralDifference4);
    let ratio = table.error(DerivativeMode::CentralDifference4, 16).unwrap()
        / table.error(DerivativeMode::CentralDifference4, 32).unwrap();
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    assert!(orders.iter().all(|o| (o - 4.0).abs() < 0.1), "{orders:?}");
    assert!(table.error(DerivativeMode::Spectral, 32).unwrap() <= 1e-10);
}

#[test]
fn probe_of_band_limited_and_zero_fields() {
    let f = ProbeField::named("band_limited", 1, 3).unwrap();
    let table = convergence_probe(&f, 1, &DEFAULT_RESOLUTIONS, &[DerivativeMode::Spectral]).unwrap();
    assert!(table.rows.iter().all(|r| r.max_error <= 1e-10));
    let z = ProbeField::named("zero", 1, 0).unwrap();
    let table = convergence_probe(&z, 1, &DEFAULT_RESOLUTIONS, &BOTH).unwrap();
    assert!(table.rows.iter().all(|r| r.max_error == 0.0));
}

#[test]
fn probe_requires_symbolic_derivative() {
    let f = ProbeField::Opaque(Box::new(|x| Complex64::new(x[0].sin(), 0.0)));
    assert!(matches!(
        convergence_probe(&f, 1, &DEFAULT_RESOLUTIONS, &BOTH),
        Err(HcfError::MissingSymbolicDerivative)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_duality(coeffs in prop::collection::vec((-3i32..=3, -3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..5)) {
        let grid = TorusGrid::periodic(1, 16, DerivativeMode::Spectral).unwrap();
        let f = TensorField::scalar(&grid, random_poly(1, &coeffs).sample(&grid)).unwrap();
        let lhs = f.conj().partial_anti(0).unwrap();
        let rhs = f.partial_holo(0).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((a - b.conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn mixed_partials_commute(coeffs in prop::collection::vec((-3i32..=3, -3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..5), fd in any::<bool>()) {
        let mode = if fd { DerivativeMode::CentralDifference4 } else { DerivativeMode::Spectral };
        let grid = TorusGrid::periodic(2, 8, mode).unwrap();
        let f = TensorField::scalar(&grid, random_poly(2, &coeffs).sample(&grid)).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let ab = f.partial_anti(b).unwrap().partial_holo(a).unwrap();
                let ba = f.partial_holo(a).unwrap().partial_anti(b).unwrap();
                prop_assert!(ab.max_diff(&ba).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn spectral_matches_symbolic(coeffs in prop::collection::vec((-3i32..=3, -3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..5)) {
        let p = random_poly(1, &coeffs);
        let table = convergence_probe(&ProbeField::Symbolic(p), 1, &[16], &[DerivativeMode::Spectral]).unwrap();
        prop_assert!(table.rows[0].max_error <= 1e-12);
    }
}
