use hcf_core::chern::ChernPackage;
use hcf_core::conditions::*;
use hcf_core::presets::{Preset, PresetKind, PresetParams};
use hcf_core::{DerivativeMode, MetricField, TorusGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}

fn random_metric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
    &a * a.adjoint() + identity(n)
}

/// `R = −Σ_m A_m ⊗ B_m` with `A_m`, `B_m` positive semidefinite: Griffiths nonpositive.
fn random_nonpositive(n: usize, g: DMatrix<Complex64>, rng: &mut ChaCha8Rng) -> PointCurvature {
    let mut rm = vec![c(0.0, 0.0); n.pow(4)];
    for _ in 0..3 {
        let va = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let vb = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let a = &va * va.adjoint();
        let b = &vb * vb.adjoint();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        rm[((i * n + j) * n + k) * n + l] -= a[(j, i)] * b[(l, k)];
                    }
                }
            }
        }
    }
    PointCurvature::new(rm, g).unwrap()
}

fn dense_sample_max(pc: &PointCurvature, count: usize, rng: &mut ChaCha8Rng) -> f64 {
    (0..count)
        .map(|_| {
            let x = random_unit(rng, &pc.g);
            let y = random_unit(rng, &pc.g);
            pc.form(&x, &y).re
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn minus_b_extremum_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = GriffithsSettings::default();
    let r2 = griffiths_extremum(&PointCurvature::minus_b(identity(2)), &s, &mut rng).unwrap();
    assert!((r2.kappa + 1.0).abs() <= 1e-8, "{}", r2.kappa);
    // attained at orthogonal X, Y
    let inner: Complex64 = r2.x.iter().zip(r2.y.iter()).map(|(a, b)| a * b.conj()).sum();
    assert!(inner.norm() < 1e-6);
    let r1 = griffiths_extremum(&PointCurvature::minus_b(identity(1)), &s, &mut rng).unwrap();
    assert!((r1.kappa + 2.0).abs() <= 1e-8);
    assert_eq!(kappa_bound(r1.kappa), Some(-1.0));
    let r0 = griffiths_extremum(&PointCurvature::new(vec![c(0.0, 0.0); 16], identity(2)).unwrap(), &s, &mut rng).unwrap();
    assert_eq!(r0.kappa, 0.0);
}

#[test]
fn diagonal_model_extremum() {
    // R_{ij̄kl̄} = c_{ik} δ_ij δ_kl: max over unit pairs is max c_{ik}
    let n: usize = 3;
    let cs = [[-3.0, -1.5, -2.0], [-0.7, -4.0, -2.5], [-1.1, -0.9, -5.0]];
    let mut rm = vec![c(0.0, 0.0); n.pow(4)];
    for i in 0..n {
        for k in 0..n {
            rm[((i * n + i) * n + k) * n + k] = c(cs[i][k], 0.0);
        }
    }
    let pc = PointCurvature::new(rm, identity(n)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = griffiths_extremum(&pc, &GriffithsSettings::default(), &mut rng).unwrap();
    assert!((r.kappa + 0.7).abs() < 1e-6, "{}", r.kappa);
    let sampled = dense_sample_max(&pc, 10_000, &mut rng);
    assert!(r.kappa >= sampled);
}

#[test]
fn extremum_dominates_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2, 3] {
        let g = random_metric(n, &mut rng);
        let pc = random_nonpositive(n, g.clone(), &mut rng).shifted(-0.3);
        let r = griffiths_extremum(&pc, &GriffithsSettings::default(), &mut rng).unwrap();
        let sampled = dense_sample_max(&pc, 10_000, &mut rng);
        assert!(r.kappa >= sampled - 1e-12, "n={n}: {} < {}", r.kappa, sampled);
        assert!(r.kappa >= r.best_start);
    }
    // closed-form cases: dense sampling approaches the extremum from below
    let pc = PointCurvature::minus_b(identity(2));
    let r = griffiths_extremum(&pc, &GriffithsSettings::default(), &mut rng).unwrap();
    let sampled = dense_sample_max(&pc, 10_000, &mut rng);
    assert!(r.kappa >= sampled && r.kappa - sampled < 0.05);
}

#[test]
fn non_hermitian_input_rejected() {
    let mut rm = vec![c(0.0, 0.0); 16];
    rm[1] = c(1.0, 0.0);
    let pc = PointCurvature::new(rm, identity(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(griffiths_extremum(&pc, &GriffithsSettings::default(), &mut rng).is_err());
}

#[test]
fn minus_b_ricci_spectrum_is_uniform() {
    for n in [1, 2, 3] {
        let grid = TorusGrid::periodic(n, 8, DerivativeMode::Spectral).unwrap();
        let g = MetricField::flat(&grid);
        let pkg = ChernPackage::compute(&g).unwrap();
        let rm = minus_b_field(&g);
        let ric = hcf_core::chern::first_ricci_trace(&rm, &pkg.g_inverse).unwrap();
        let spec = ricci_spectrum(&ric, &g).unwrap();
        for ev in &spec.eigenvalues {
            for v in ev {
                assert!((v + (n as f64 + 1.0)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn eps_shift_of_flat_metric() {
    let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
    let g = MetricField::flat(&grid);
    let pkg = ChernPackage::compute(&g).unwrap();
    let zero = eps_shift(&pkg.rm_lowered, &g, &pkg.g_inverse, 0.0).unwrap();
    assert_eq!(zero.r_eps.max_diff(&pkg.rm_lowered).unwrap(), 0.0);
    assert!(zero.trace_residual <= 1e-10);
    let one = eps_shift(&pkg.rm_lowered, &g, &pkg.g_inverse, 1.0).unwrap();
    assert!(one.r_eps.max_diff(&minus_b_field(&g)).unwrap() == 0.0);
    let ric = hcf_core::chern::first_ricci_trace(&one.r_eps, &pkg.g_inverse).unwrap();
    assert!(ric.max_diff(&g.field().scale(c(-3.0, 0.0))).unwrap() < 1e-12);
    assert!(eps_shift(&pkg.rm_lowered, &g, &pkg.g_inverse, -1.0).is_err());
}

#[test]
fn shifted_tensor_keeps_conjugation_symmetry() {
    let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
    let g = Preset::new(PresetKind::NonKahler, 2, PresetParams::default()).unwrap().sample(&grid).unwrap();
    let pkg = ChernPackage::compute(&g).unwrap();
    let shift = eps_shift(&pkg.rm_lowered, &g, &pkg.g_inverse, 0.3).unwrap();
    for p in sample_points(grid.num_points(), 50) {
        let base = PointCurvature::from_field(&pkg.rm_lowered, &g, p).conjugation_defect();
        assert!(PointCurvature::from_field(&shift.r_eps, &g, p).conjugation_defect() <= base + 1e-10);
    }
}

#[test]
fn b_scales_quadratically_and_ricci_eigenvalues_inversely() {
    let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
    let g = Preset::new(PresetKind::NonKahler, 2, PresetParams::default()).unwrap().sample(&grid).unwrap();
    let lambda = 3.0;
    let gs = g.scaled(lambda).unwrap();
    let b = b_tensor(&g);
    assert!(b_tensor(&gs).max_diff(&b.scale(c(lambda * lambda, 0.0))).unwrap() < 1e-12);
    let pkg = ChernPackage::compute(&g).unwrap();
    let a = ricci_spectrum(&pkg.ric_first, &g).unwrap();
    let s = ricci_spectrum(&pkg.ric_first, &gs).unwrap();
    assert_eq!(a.argmax, s.argmax);
    for (x, y) in a.eigenvalues.iter().zip(&s.eigenvalues) {
        for (u, v) in x.iter().zip(y) {
            assert!((v - u / lambda).abs() < 1e-12);
        }
    }
}

#[test]
fn pinch_equality_witness_for_minus_b() {
    for n in [1, 2, 3] {
        let pc = PointCurvature::minus_b(identity(n));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = pinch_margin_point(&pc, 0.0, 0.0, 200, &mut rng).unwrap();
        assert!(r.witness_cs_margin <= 1e-9);
        assert!(r.min_cs_margin >= -1e-9);
        // Ricci margin at u = v = x is (n+1)² − 4
        let e = DVector::from_fn(n, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let s = pinch_sample(&pc, &pc.ricci().unwrap(), 1.0, &e, &e, &e);
        assert!((s.ricci_margin - ((n as f64 + 1.0).powi(2) - 4.0)).abs() < 1e-12);
    }
}

#[test]
fn pinch_margin_independent_of_t_when_k_vanishes() {
    let pc = PointCurvature::minus_b(identity(2)).shifted(0.1);
    let a = pinch_margin_point(&pc, 0.0, 0.0, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = pinch_margin_point(&pc, 0.0, 17.0, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a.min_ricci_margin, b.min_ricci_margin);
}

#[test]
fn griffiths_nonpositive_gives_strict_pinch_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [2, 3] {
        for _ in 0..5 {
            let g = random_metric(n, &mut rng);
            let pc = random_nonpositive(n, g, &mut rng);
            let k = griffiths_extremum(&pc, &GriffithsSettings::default(), &mut rng).unwrap();
            assert!(k.kappa <= NONPOSITIVE_TOL);
            let r = pinch_margin_point(&pc.shifted(0.05), 0.0, 0.0, 2000, &mut rng).unwrap();
            assert!(r.violated.is_none());
            assert!(r.min_ricci_margin > 0.0, "n={n}: {}", r.min_ricci_margin);
            assert!(r.max_ratio < 1.0);
        }
    }
}

#[test]
fn classify_flat_minus_b_and_sign_changing_conformal() {
    let settings = ConditionSettings {
        griffiths_points: 8,
        pinch_points: 4,
        pinch_samples: 16,
        ..ConditionSettings::default()
    };
    let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
    let g = MetricField::flat(&grid);
    let pkg = ChernPackage::compute(&g).unwrap();
    let flat = classify(&analyze_package(&pkg, 0.0, &settings).unwrap());
    assert!(flat.griffiths_nonpositive && flat.ricci_nonpositive && !flat.ricci_quasi_negative);

    let synth = analyze(&minus_b_field(&g), &g, &pkg.g_inverse, 0.0, &settings).unwrap();
    let s = classify(&synth);
    assert!(s.griffiths_nonpositive && s.ricci_quasi_negative);
    assert!((s.griffiths_max + 1.0).abs() < 1e-8);
    assert!((s.ricci_max + 3.0).abs() < 1e-12);

    let grid1 = TorusGrid::periodic(1, 16, DerivativeMode::Spectral).unwrap();
    let preset = Preset::new(PresetKind::Conformal, 1, PresetParams { amplitude: 0.3, modes: 2, seed: 9 }).unwrap();
    let g1 = preset.sample(&grid1).unwrap();
    let pkg1 = ChernPackage::compute(&g1).unwrap();
    let r = classify(&analyze_package(&pkg1, 0.0, &settings).unwrap());
    assert!(!r.ricci_nonpositive);
    // witness: −∂∂̄u > 0 there
    let ddu = preset.conformal_factor().unwrap().d_holo(0).d_anti(0);
    assert!(-ddu.eval(&grid1.coordinates(r.ricci_witness_point)).re > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kappa_nonincreasing_in_epsilon(seed in any::<u64>(), e1 in 0.0f64..0.5, de in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_metric(2, &mut rng);
        let pc = random_nonpositive(2, g, &mut rng);
        let s = GriffithsSettings::default();
        let a = griffiths_extremum(&pc.shifted(e1), &s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = griffiths_extremum(&pc.shifted(e1 + de), &s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(b.kappa <= a.kappa + 1e-9);
    }

    #[test]
    fn realness_of_bihermitian_form(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_metric(3, &mut rng);
        let pc = random_nonpositive(3, g.clone(), &mut rng);
        let x = random_unit(&mut rng, &g);
        let y = random_unit(&mut rng, &g);
        prop_assert!(pc.form(&x, &y).im.abs() <= 1e-10);
    }
}

#[test]
fn pinch_margin_of_a_curve_is_identically_zero() {
    // n = 1: Ric_{uū} = R_{uūxx̄} for unit x, so the Cauchy–Schwarz chain is an equality
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let g = random_metric(1, &mut rng);
        let pc = random_nonpositive(1, g, &mut rng).shifted(0.05);
        let scale = (pc.at(0, 0, 0, 0).norm() / pc.g[(0, 0)].re.powi(2)).powi(2);
        let r = pinch_margin_point(&pc, 0.0, 0.0, 500, &mut rng).unwrap();
        assert!(r.violated.is_none());
        assert!(r.min_ricci_margin.abs() <= 1e-12 * scale, "{} vs {scale}", r.min_ricci_margin);
    }
}
