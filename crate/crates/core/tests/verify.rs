use hcf_core::chern::{ChernPackage, LaplacianConvention};
use hcf_core::flow::{step_hcf, FlowState, Trajectory};
use hcf_core::presets::{Preset, PresetKind, PresetParams};
use hcf_core::verify::{
    delta_study, evolution_residual, fd_time_derivative, identity_suite, record_states, rhs_ricci_evolution,
    rhs_rm_evolution, ricci_evolution_terms, rm_evolution_terms, trace_compatibility, Quantity,
};
use hcf_core::{DerivativeMode, HcfError, MetricField, TorusGrid};

fn preset_metric(kind: PresetKind, n: usize, res: usize, amplitude: f64) -> (Preset, MetricField) {
    let grid = TorusGrid::periodic(n, res, DerivativeMode::Spectral).unwrap();
    let preset = Preset::new(
        kind,
        n,
        PresetParams {
            amplitude,
            modes: 3,
            seed: 7,
        },
    )
    .unwrap();
    let g = preset.sample(&grid).unwrap();
    (preset, g)
}

fn refreshed(g: &MetricField) -> FlowState {
    let mut s = FlowState::new(g.clone());
    s.refresh().unwrap();
    s
}

#[test]
fn flat_metric_has_zero_right_hand_sides_and_exact_identities() {
    let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
    let pkg = ChernPackage::compute(&MetricField::flat(&grid)).unwrap();
    let rm = rm_evolution_terms(&pkg).unwrap();
    for (name, t) in rm.named() {
        assert_eq!(t.max_abs(), 0.0, "{name}");
    }
    let ric = ricci_evolution_terms(&pkg).unwrap();
    for (name, t) in ric.named() {
        assert_eq!(t.max_abs(), 0.0, "{name}");
    }
    let report = identity_suite(&pkg, 1e-13, 1).unwrap();
    assert!(report.all_pass(), "{}", report.render());
    assert_eq!(report.entries.len(), 15);
}

/// n = 1, g = e^u, w = ∂∂̄u: the flow is `∂_t g = w`, so differentiating
/// `R_{11̄11̄} = −∂∂̄g + g⁻¹∂g∂̄g` directly gives
/// `∂_t R_{11̄11̄} = −∂∂̄w + ∂u∂̄w + ∂w∂̄u − w|∂u|²` and
/// `∂_t R_{11̄} = e^{−u}(∂_t R_{11̄11̄} + w²)`.
#[test]
fn curve_right_hand_sides_match_direct_differentiation() {
    let (preset, g) = preset_metric(PresetKind::Conformal, 1, 32, 0.4);
    let state = refreshed(&g);
    let rhs_rm = rhs_rm_evolution(&state).unwrap();
    let rhs_ric = rhs_ricci_evolution(&state).unwrap();
    let u = preset.conformal_factor().unwrap();
    let du = u.d_holo(0);
    let w = u.d_holo(0).d_anti(0);
    let dw = w.d_holo(0);
    let ddw = w.d_holo(0).d_anti(0);
    let grid = g.grid().clone();
    let mut worst_rm: f64 = 0.0;
    let mut worst_ric: f64 = 0.0;
    for p in 0..grid.num_points() {
        let x = grid.coordinates(p);
        let (uu, du, w, dw, ddw) = (u.eval(&x).re, du.eval(&x), w.eval(&x).re, dw.eval(&x), ddw.eval(&x));
        let expect_rm = -ddw + 2.0 * (du * dw.conj()).re - w * du.norm_sqr();
        let expect_ric = (-uu).exp() * (expect_rm + w * w);
        worst_rm = worst_rm.max((rhs_rm.data()[p] - expect_rm).norm());
        worst_ric = worst_ric.max((rhs_ric.data()[p] - expect_ric).norm());
    }
    assert!(worst_rm <= 1e-6, "curvature rhs {worst_rm:e}");
    assert!(worst_ric <= 1e-6, "ricci rhs {worst_ric:e}");
}

#[test]
fn torsion_terms_vanish_exactly_on_a_curve_and_to_roundoff_when_kahler() {
    let (_, g) = preset_metric(PresetKind::Conformal, 1, 16, 0.4);
    let pkg = ChernPackage::compute(&g).unwrap();
    for t in rm_evolution_terms(&pkg).unwrap().torsion_terms() {
        assert_eq!(t.max_abs(), 0.0);
    }
    for t in ricci_evolution_terms(&pkg).unwrap().torsion_terms() {
        assert_eq!(t.max_abs(), 0.0);
    }

    let (_, g) = preset_metric(PresetKind::KahlerPotential, 2, 8, 0.2);
    let pkg = ChernPackage::compute(&g).unwrap();
    let rm = rm_evolution_terms(&pkg).unwrap();
    let scale = rm.laplacian.max_abs();
    assert!(scale > 1e-3);
    for t in rm.torsion_terms() {
        assert!(t.max_abs() <= 1e-12 * scale, "{:e}", t.max_abs());
    }
}

#[test]
fn traced_curvature_equation_gives_the_ricci_equation() {
    let trace_residuals = |kind, n, res, amp| {
        let (_, g) = preset_metric(kind, n, res, amp);
        let pkg = ChernPackage::compute(&g).unwrap();
        let rm = rm_evolution_terms(&pkg).unwrap();
        let ric = ricci_evolution_terms(&pkg).unwrap();
        [LaplacianConvention::Symmetrized, LaplacianConvention::HoloFirst]
            .map(|c| trace_compatibility(&pkg, &rm.total(c).unwrap(), &ric.total(c).unwrap()).unwrap())
    };
    for r in trace_residuals(PresetKind::Conformal, 1, 32, 0.4) {
        assert!(r <= 1e-9, "{r:e}");
    }
    let coarse = trace_residuals(PresetKind::NonKahler, 2, 8, 0.1);
    let fine = trace_residuals(PresetKind::NonKahler, 2, 16, 0.1);
    // discrete derivatives obey the product rule only up to aliasing, so the
    // residual converges spectrally rather than vanishing
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(*f <= 1e-5 && c / f >= 100.0, "{coarse:?} {fine:?}");
    }
}

#[test]
fn metric_difference_quotient_matches_minus_second_ricci() {
    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 16, 0.1);
    let delta = 1e-3;
    let traj = record_states(&g, &[0.0, delta, 2.0 * delta], delta / 4.0).unwrap();
    let r = evolution_residual(&traj, Quantity::Metric, delta, delta).unwrap();
    assert!(r.sup <= 1e-5 * r.rhs_sup.max(1.0), "{r:?}");
    let (lhs, rhs) = r.fields.as_ref().unwrap();
    assert_eq!(lhs.max_diff(rhs).unwrap(), r.sup);
}

#[test]
fn curvature_residual_decays_at_second_order_in_delta() {
    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 16, 0.1);
    let study = delta_study(&g, 4e-2, &[4e-2, 2e-2, 1e-2], 4).unwrap();
    for o in study.rm_orders.iter().chain(&study.ricci_orders) {
        assert!((1.8..=2.3).contains(o), "orders {:?} {:?}", study.rm_orders, study.ricci_orders);
    }
    // the alternate Laplacian leaves a residual that does not shrink with δ
    let last = study.rm.last().unwrap();
    assert!(last.sup_holo_first >= 10.0 * last.sup, "{last:?}");
    assert!(last.torsion_terms_sup > 1e-4);

    let (_, g) = preset_metric(PresetKind::Conformal, 1, 32, 0.4);
    let study = delta_study(&g, 1e-3, &[1e-3, 5e-4, 2.5e-4], 2).unwrap();
    for o in study.rm_orders.iter().chain(&study.ricci_orders) {
        assert!((1.9..=2.1).contains(o), "orders {:?} {:?}", study.rm_orders, study.ricci_orders);
    }
    assert!(study.rm.iter().all(|r| r.torsion_terms_sup == 0.0));
}

#[test]
fn coarse_grid_residual_stalls_at_the_spatial_floor() {
    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 8, 0.1);
    let study = delta_study(&g, 1e-3, &[1e-3, 5e-4, 2.5e-4], 1).unwrap();
    for o in &study.rm_orders {
        assert!(o.abs() < 0.5, "orders {:?}", study.rm_orders);
    }
}

#[test]
fn identities_hold_on_a_non_kahler_surface_at_resolution_32() {
    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 32, 0.1);
    let pkg = ChernPackage::compute(&g).unwrap();
    let report = identity_suite(&pkg, 1e-7, 3).unwrap();
    assert!(report.all_pass(), "{}", report.render());
    assert!(report.get("torsion_swap_pairs").unwrap().value <= 1e-7);
}

#[test]
fn finite_differences_need_recorded_states() {
    let (_, g) = preset_metric(PresetKind::Conformal, 1, 8, 0.2);
    let mut traj = Trajectory::default();
    let mut s = FlowState::new(g.clone());
    for _ in 0..3 {
        traj.push(s.t, s.g.clone());
        s = step_hcf(&s, 1e-3).unwrap();
    }
    assert!(fd_time_derivative(&traj, Quantity::Metric, 1e-3, 1e-3).is_ok());
    let err = fd_time_derivative(&traj, Quantity::Metric, 2e-3, 1e-3).unwrap_err();
    assert!(matches!(err, HcfError::MissingBracketingState { t } if (t - 3e-3).abs() < 1e-15));
    assert!(matches!(
        evolution_residual(&traj, Quantity::FullCurvature, 5e-3, 1e-3),
        Err(HcfError::MissingBracketingState { .. })
    ));
    assert!(record_states(&g, &[1.5e-3], 1e-3).is_err());
}
