//! Acceptance criteria: one PASS/FAIL line per criterion with the checks that
//! make it up listed underneath. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hcf_cli::config::RunConfig;
use hcf_core::chern::{first_ricci_trace, inverse_metric, tensor_norms, ChernPackage};
use hcf_core::conditions::{
    griffiths_extremum, minus_b_field, pinch_margin_point, ricci_spectrum, GriffithsSettings, PointCurvature,
    NONPOSITIVE_TOL,
};
use hcf_core::flow::{
    bump, heat_step, run_flow, smp_max_eigenvalue, stability_cap, step_hcf, Checkpoint, FlowSettings,
    FlowState, HeatScheme, StepController,
};
use hcf_core::presets::{Preset, PresetKind, PresetParams};
use hcf_core::verify::{delta_study, identity_suite, DeltaStudy};
use hcf_core::{DerivativeMode, MetricField, TorusGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<Vec<(bool, String)>, String>;

struct Checks(Vec<(bool, String)>);

impl Checks {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn add(&mut self, ok: bool, text: impl Into<String>) {
        self.0.push((ok, text.into()));
    }

    fn done(self) -> Outcome {
        Ok(self.0)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn preset_metric(kind: PresetKind, n: usize, res: usize, amplitude: f64, seed: u64) -> Result<(Preset, MetricField), String> {
    let grid = TorusGrid::periodic(n, res, DerivativeMode::Spectral).map_err(err)?;
    let preset = Preset::new(
        kind,
        n,
        PresetParams {
            amplitude,
            modes: 3,
            seed,
        },
    )
    .map_err(err)?;
    let g = preset.sample(&grid).map_err(err)?;
    Ok((preset, g))
}

fn k_now(g: &MetricField) -> Result<f64, String> {
    Ok(tensor_norms(&ChernPackage::compute(g).map_err(err)?).map_err(err)?.k_now)
}

fn identities() -> Outcome {
    let mut c = Checks::new();
    for (kind, n, amp, tol) in [
        (PresetKind::Flat, 2, 0.0, 1e-13),
        (PresetKind::Conformal, 1, 0.4, 1e-7),
        (PresetKind::NonKahler, 2, 0.1, 1e-7),
    ] {
        let (_, g) = preset_metric(kind, n, 32, amp, 7)?;
        let pkg = ChernPackage::compute(&g).map_err(err)?;
        let report = identity_suite(&pkg, tol, 3).map_err(err)?;
        let failing: Vec<&str> = report.entries.iter().filter(|e| !e.pass).map(|e| e.name).collect();
        c.add(
            report.all_pass(),
            format!(
                "{kind} n={n}: {} identities, max residual {:.2e} <= {tol:e}{}",
                report.entries.len(),
                report.max_value(),
                if failing.is_empty() { String::new() } else { format!(" (failing: {})", failing.join(", ")) }
            ),
        );
    }
    c.done()
}

fn orders_in(study: &DeltaStudy, lo: f64, hi: f64) -> bool {
    study.rm_orders.iter().chain(&study.ricci_orders).all(|o| (lo..=hi).contains(o))
}

fn describe(study: &DeltaStudy) -> String {
    let sups = |r: &[hcf_core::verify::EvolutionResidual]| r.iter().map(|x| format!("{:.2e}", x.sup)).collect::<Vec<_>>().join("/");
    format!(
        "Rm residuals {} orders {:.3?}; Ricci residuals {} orders {:.3?}",
        sups(&study.rm),
        study.rm_orders,
        sups(&study.ricci),
        study.ricci_orders
    )
}

fn evolution() -> Outcome {
    let mut c = Checks::new();
    let deltas = [1e-3, 5e-4, 2.5e-4];

    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 32, 0.1, 7)?;
    let study = delta_study(&g, 1e-3, &deltas, 1).map_err(err)?;
    drop(g);
    c.add(
        orders_in(&study, 1.8, 2.2),
        format!("non-Kähler n=2 res 32: {}; orders in [1.8, 2.2]", describe(&study)),
    );
    let torsion = study.rm.iter().map(|r| r.torsion_terms_sup).fold(0.0, f64::max);
    c.add(torsion > 1e-6, format!("non-Kähler torsion terms active: sup {torsion:.2e}"));
    drop(study);

    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 16, 0.1, 7)?;
    let floor = delta_study(&g, 1e-3, &deltas, 1).map_err(err)?;
    let flat = floor.rm_orders.iter().all(|o| o.abs() < 0.5);
    let bottom = floor.rm.last().map_or(0.0, |r| r.sup);
    c.add(
        flat && bottom > 1e-6,
        format!("res 16 bottoms at the spatial floor {bottom:.2e}: Rm orders {:.3?}, |order| < 0.5", floor.rm_orders),
    );

    let (_, g) = preset_metric(PresetKind::Conformal, 1, 32, 0.4, 7)?;
    let kahler = delta_study(&g, 1e-3, &deltas, 2).map_err(err)?;
    let zero = kahler.rm.iter().chain(&kahler.ricci).all(|r| r.torsion_terms_sup == 0.0);
    c.add(zero, "Kähler n=1: torsion terms exactly 0.0 at every δ");
    c.add(
        orders_in(&kahler, 1.8, 2.2),
        format!("Kähler n=1 res 32: {}; orders in [1.8, 2.2]", describe(&kahler)),
    );
    c.done()
}

fn fixed_dt_run(g: &MetricField, t: f64, dt: f64) -> Result<MetricField, String> {
    let steps = (t / dt).round() as usize;
    let mut s = FlowState::new(g.clone());
    for _ in 0..steps {
        s = step_hcf(&s, dt).map_err(err)?;
    }
    Ok(s.g)
}

fn integrator() -> Outcome {
    let mut c = Checks::new();

    let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).map_err(err)?;
    let g0 = MetricField::flat(&grid);
    let settings = FlowSettings {
        t_end: 1.0,
        controller: StepController {
            max_dt: 1e-3,
            ..StepController::default()
        },
        max_steps: Some(100),
        conditions: None,
    };
    let out = run_flow(FlowState::new(g0.clone()), None, HeatScheme::default(), 0.0, &settings, &mut ()).map_err(err)?;
    let drift = out.state.g.field().max_diff(g0.field()).map_err(err)?;
    c.add(
        out.state.step == 100 && drift <= 1e-12,
        format!("flat fixed point: drift {drift:.2e} after {} steps <= 1e-12", out.state.step),
    );

    let (_, g) = preset_metric(PresetKind::Conformal, 1, 16, 0.5, 5)?;
    let dts = [0.04, 0.02, 0.01];
    let reference = fixed_dt_run(&g, 0.4, dts[2] / 10.0)?;
    let mut errors = Vec::new();
    for dt in dts {
        errors.push(fixed_dt_run(&g, 0.4, dt)?.field().max_diff(reference.field()).map_err(err)?);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    c.add(
        orders.iter().all(|o| (3.7..=4.3).contains(o)),
        format!(
            "RK4 self-convergence on conformal n=1: errors {} orders {orders:.3?} in [3.7, 4.3]",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join("/")
        ),
    );

    let (preset, g) = preset_metric(PresetKind::Conformal, 1, 32, 0.1, 5)?;
    let grid = g.grid().clone();
    let u = preset.conformal_factor().ok_or("conformal preset has a factor")?;
    let ddbar = u.d_anti(0).d_holo(0).sample(&grid);
    let dt = 1e-4;
    let next = step_hcf(&FlowState::new(g.clone()), dt).map_err(err)?;
    let step_err = (0..grid.num_points())
        .map(|p| (next.g.field().comp(0)[p] - g.field().comp(0)[p] - ddbar[p] * dt).norm())
        .fold(0.0, f64::max);
    c.add(
        step_err <= 1e-8,
        format!("n=1 single step vs symbolic -S: {step_err:.2e} <= 1e-8 (dt = {dt:e})"),
    );
    c.done()
}

fn doubling() -> Outcome {
    let mut c = Checks::new();
    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 8, 0.05, 5)?;
    let k0 = k_now(&g)?;
    let c1 = 0.5;
    let settings = FlowSettings {
        t_end: c1 / k0,
        controller: StepController {
            max_dt: 1.0,
            ..StepController::default()
        },
        max_steps: None,
        conditions: None,
    };
    let out = run_flow(FlowState::new(g), None, HeatScheme::default(), k0, &settings, &mut ()).map_err(err)?;
    let r = out.doubling.report(c1);
    c.add(
        out.completed() && r.window_covered,
        format!("K0 = {k0:.4e}; {} steps cover [0, 0.5/K0] = [0, {:.4}]", out.state.step, r.window_end),
    );
    c.add(r.within_2k0, format!("sup(|Rm| + |T|^2 + |∇T|) <= 2 K0: max ratio {:.4}", r.max_k_ratio));
    c.add(
        r.envelope_ok,
        format!("fitted (1/K0 - c0 t)^-2 envelopes F_sup within factor 2 on the window: c0 = {:.4}", r.c0_fit),
    );
    c.done()
}

fn identity(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}

fn cx(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// `R = −Σ_m a_m ⊗ b_m` with rank-one positive `a_m`, `b_m`: Griffiths nonpositive by construction.
fn random_nonpositive(n: usize, rng: &mut ChaCha8Rng) -> Result<PointCurvature, String> {
    let a = DMatrix::from_fn(n, n, |_, _| cx(rng) * 0.5);
    let g = &a * a.adjoint() + identity(n);
    let mut rm = vec![Complex64::new(0.0, 0.0); n.pow(4)];
    for _ in 0..3 {
        let va = DVector::from_fn(n, |_, _| cx(rng));
        let vb = DVector::from_fn(n, |_, _| cx(rng));
        let pa = &va * va.adjoint();
        let pb = &vb * vb.adjoint();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        rm[((i * n + j) * n + k) * n + l] -= pa[(j, i)] * pb[(l, k)];
                    }
                }
            }
        }
    }
    PointCurvature::new(rm, g).map_err(err)
}

fn conditions() -> Outcome {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gs = GriffithsSettings::default();
    for (n, expected) in [(2, -1.0), (1, -2.0)] {
        let r = griffiths_extremum(&PointCurvature::minus_b(identity(n)), &gs, &mut rng).map_err(err)?;
        c.add(
            (r.kappa - expected).abs() <= 1e-8,
            format!("griffiths_extremum(-B), n={n}: {:.12} vs {expected} (tol 1e-8)", r.kappa),
        );
    }

    for n in 1..=3 {
        let grid = TorusGrid::periodic(n, 8, DerivativeMode::Spectral).map_err(err)?;
        let g = MetricField::flat(&grid);
        let ginv = inverse_metric(&g).map_err(err)?;
        let ric = first_ricci_trace(&minus_b_field(&g), &ginv).map_err(err)?;
        let spec = ricci_spectrum(&ric, &g).map_err(err)?;
        let target = -((n + 1) as f64);
        let worst = spec.eigenvalues.iter().flatten().map(|v| (v - target).abs()).fold(0.0, f64::max);
        c.add(worst <= 1e-12, format!("Ricci spectrum of -B, n={n}: all {target} to {worst:.1e}"));
    }

    // The strict inequality needs a unit direction orthogonal to x; for n = 1
    // Ric_{uū} = R_{uūxx̄} and the margin vanishes identically.
    let samples = 10_000;
    let epsilon = 0.05;
    let mut tensors: Vec<(usize, String, PointCurvature)> =
        (1..=3).map(|n| (n, format!("-B n={n}"), PointCurvature::minus_b(identity(n)))).collect();
    for n in 1..=3 {
        for i in 0..3 {
            tensors.push((n, format!("random n={n} #{i}"), random_nonpositive(n, &mut rng)?));
        }
    }
    let mut strict = (true, f64::INFINITY, 0);
    let mut curve = (true, 0.0f64, 0);
    for (n, name, pc) in &tensors {
        let kappa = griffiths_extremum(pc, &gs, &mut rng).map_err(err)?.kappa;
        if kappa > NONPOSITIVE_TOL {
            c.add(false, format!("{name}: κ̂ = {kappa:e} is not nonpositive"));
            continue;
        }
        let shifted = pc.shifted(epsilon);
        let r = pinch_margin_point(&shifted, 0.0, 0.0, samples, &mut rng).map_err(err)?;
        let complete = r.violated.is_none() && r.samples >= samples;
        if *n == 1 {
            let scale = (shifted.at(0, 0, 0, 0).norm() / shifted.g[(0, 0)].re.powi(2)).powi(2);
            curve.0 &= complete && r.min_ricci_margin.abs() <= 1e-12 * scale;
            curve.1 = curve.1.max(r.min_ricci_margin.abs() / scale);
            curve.2 += 1;
        } else {
            strict.0 &= complete && r.min_ricci_margin > 0.0;
            strict.1 = strict.1.min(r.min_ricci_margin);
            strict.2 += 1;
        }
    }
    c.add(
        strict.0,
        format!(
            "pinch margin at ε = {epsilon}, n = 2, 3: {} Griffiths-nonpositive tensors × {samples} samples, min {:.3e} > 0",
            strict.2, strict.1
        ),
    );
    c.add(
        curve.0,
        format!(
            "pinch margin at ε = {epsilon}, n = 1: {} tensors × {samples} samples, identically zero (max relative |margin| {:.1e} <= 1e-12)",
            curve.2, curve.1
        ),
    );

    let mut witness: f64 = 0.0;
    for n in 1..=3 {
        let r = pinch_margin_point(&PointCurvature::minus_b(identity(n)), 0.0, 0.0, 200, &mut rng).map_err(err)?;
        witness = witness.max(r.witness_cs_margin.abs());
    }
    c.add(witness <= 1e-9, format!("equality witness u = v = x at ε = 0 on -B: |margin| {witness:.1e} <= 1e-9"));
    c.done()
}

fn heat() -> Outcome {
    let mut c = Checks::new();

    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 8, 0.2, 5)?;
    let mut worst: f64 = 0.0;
    for scheme in [HeatScheme::SpectralRk4, HeatScheme::Monotone] {
        let mut phi = vec![1.0; g.grid().num_points()];
        for _ in 0..10 {
            phi = heat_step(&phi, &g, 1e-2, scheme).map_err(err)?;
        }
        worst = worst.max(phi.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
    }
    c.add(worst <= 1e-12, format!("constant φ stationary on a non-Kähler metric: {worst:.1e} <= 1e-12"));

    let grid = TorusGrid::periodic(1, 16, DerivativeMode::Spectral).map_err(err)?;
    let flat = MetricField::flat(&grid);
    let np = grid.num_points();
    let mut phi: Vec<f64> = (0..np).map(|p| grid.coordinates(p)[0].cos()).collect();
    let (dt, steps) = (0.01, 200);
    let stable = dt <= stability_cap(&flat, 0.5).map_err(err)?;
    for _ in 0..steps {
        phi = heat_step(&phi, &flat, dt, HeatScheme::SpectralRk4).map_err(err)?;
    }
    let t = dt * steps as f64;
    let decay = (0..np)
        .map(|p| (phi[p] - (-t / 4.0).exp() * grid.coordinates(p)[0].cos()).abs())
        .fold(0.0, f64::max);
    c.add(stable && decay <= 1e-8, format!("cos x mode decays as e^(-t/4): error {decay:.2e} <= 1e-8 at t = {t}"));

    let mut positive = true;
    let mut min_late = f64::INFINITY;
    for (kind, n, res, amp) in [(PresetKind::Flat, 1, 16, 0.0), (PresetKind::Conformal, 2, 8, 0.2)] {
        let (_, g) = preset_metric(kind, n, res, amp, 5)?;
        let mut phi = bump(g.grid(), 1.0, 1.0);
        positive &= phi.contains(&0.0);
        for step in 1..=20 {
            phi = heat_step(&phi, &g, 1e-2, HeatScheme::Monotone).map_err(err)?;
            let min = phi.iter().cloned().fold(f64::INFINITY, f64::min);
            if step >= 10 {
                positive &= min > 0.0;
                min_late = min_late.min(min);
            }
        }
    }
    c.add(positive, format!("nonnegative bump: min φ = {min_late:.2e} > 0 for t >= 10 dt"));

    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let grid = TorusGrid::periodic(n, 8, DerivativeMode::Spectral).map_err(err)?;
        let g = MetricField::flat(&grid);
        let ginv = inverse_metric(&g).map_err(err)?;
        let ric = first_ricci_trace(&minus_b_field(&g), &ginv).map_err(err)?;
        let amp = ((n + 1) as f64).sqrt() * 0.8;
        let phi = vec![amp; grid.num_points()];
        for (t, k, b, eps) in [(0.0, 0.0, 0.0, 0.01), (0.3, 2.0, 1.5, 0.05)] {
            let (max, _) = smp_max_eigenvalue(&ric, &g, &phi, t, k, b, eps).map_err(err)?;
            let expected = -((n + 1) as f64) + (-k * t).exp() * amp * amp - eps * (b * t).exp();
            worst = worst.max((max - expected).abs());
        }
    }
    c.add(worst <= 1e-10, format!("Aᵉ eigenvalue on R = -B vs closed form: {worst:.1e} <= 1e-10"));
    c.done()
}

fn hcf(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hcf"))
        .args(args)
        .env_remove("HCF_OUTPUT_ROOT")
        .output()
        .map_err(err)?;
    out.status.code().ok_or_else(|| "killed by a signal".into())
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    matches!((std::fs::read(a), std::fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

const NON_KAHLER: &str = "[preset]\nname = \"non_kahler\"\namplitude = 0.1\nseed = 7\n\n[grid]\nn = 2\nresolution = 8\n\n[flow]\nt_end = 10.0\n\n[monitors]\nconditions = false\n";

fn infrastructure() -> Outcome {
    let mut c = Checks::new();
    let tmp = tempfile::tempdir().map_err(err)?;
    let dir = tmp.path();
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();

    // in-process: 10 steps versus 5 + checkpoint bytes + 5
    let (_, g) = preset_metric(PresetKind::NonKahler, 2, 8, 0.2, 5)?;
    let k0 = k_now(&g)?;
    let mut s = FlowSettings {
        t_end: 1.0,
        controller: StepController {
            max_dt: 5e-3,
            ..StepController::default()
        },
        max_steps: Some(10),
        conditions: None,
    };
    let full = run_flow(FlowState::new(g.clone()), None, HeatScheme::default(), k0, &s, &mut ()).map_err(err)?;
    s.max_steps = Some(5);
    let half = run_flow(FlowState::new(g), None, HeatScheme::default(), k0, &s, &mut ()).map_err(err)?;
    let mut buf = Vec::new();
    Checkpoint::new(&half.state, None, 5, "h", "", k0, None).write_to(&mut buf).map_err(err)?;
    let resumed = Checkpoint::read_from(buf.as_slice()).map_err(err)?.state();
    s.max_steps = Some(10);
    let rest = run_flow(resumed, None, HeatScheme::default(), k0, &s, &mut ()).map_err(err)?;
    c.add(
        rest.state.g.field().data() == full.state.g.field().data() && rest.state.t.to_bits() == full.state.t.to_bits(),
        "library: 5 + checkpoint + 5 steps bit-identical to 10 steps",
    );

    // binary: 100 steps versus 50 + resume to 100
    std::fs::write(p("nk.toml"), NON_KAHLER).map_err(err)?;
    let whole = hcf(&["run", &p("nk.toml"), "--set", "flow.max_steps=100", "--output", &p("whole")])?;
    let first = hcf(&["run", &p("nk.toml"), "--set", "flow.max_steps=50", "--output", &p("split")])?;
    let second = hcf(&[
        "resume",
        &p("split/final.ckpt"),
        "--set",
        "flow.max_steps=100",
        "--output",
        &p("split"),
    ])?;
    let identical = ["final.ckpt", "timeseries.csv"]
        .iter()
        .all(|f| same_bytes(&dir.join("whole").join(f), &dir.join("split").join(f)));
    c.add(
        (whole, first, second) == (0, 0, 0) && identical,
        "hcf: run 100 steps vs run 50 + resume 50: final checkpoint and time series byte-identical",
    );

    let mut cfg = RunConfig::default();
    cfg.preset.name = PresetKind::NonKahler;
    cfg.preset.amplitude = 0.1;
    cfg.grid.resolution = 8;
    cfg.flow.t_end_k0 = Some(1.0 / 3.0);
    cfg.monitors.heat = true;
    cfg.check.deltas = vec![1e-3, 3e-4];
    let back = RunConfig::parse(&cfg.to_toml(), &[]).map_err(err)?;
    c.add(back == cfg && back.hash() == cfg.hash(), "config TOML round-trip preserves every field and the hash");

    std::fs::write(p("flat.toml"), "[grid]\nn = 1\nresolution = 8\n[flow]\nt_end = 0.01\n").map_err(err)?;
    std::fs::write(p("bad.toml"), "[grid]\nn = 1\nresolution = 7\n").map_err(err)?;
    std::fs::write(p("bad.ckpt"), "HCFCKPT garbage").map_err(err)?;
    let codes = vec![
        (0, hcf(&["run", &p("flat.toml"), "--output", &p("o0")])?),
        (2, hcf(&["run", &p("bad.toml"), "--output", &p("o2")])?),
        (
            3,
            hcf(&[
                "run",
                &p("nk.toml"),
                "--set",
                "flow.c1=1e-4",
                "--set",
                "flow.min_dt=1e-3",
                "--output",
                &p("o3"),
            ])?,
        ),
        (
            4,
            hcf(&[
                "check",
                "conditions",
                &p("nk.toml"),
                "--set",
                "monitors.griffiths_points=8",
                "--output",
                &p("o4"),
            ])?,
        ),
        (5, hcf(&["resume", &p("bad.ckpt"), "--output", &p("o5")])?),
    ];
    c.add(
        codes.iter().all(|(want, got)| want == got),
        format!("exit codes (expected, got): {codes:?}"),
    );
    c.done()
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget_s: Option<f64>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "identity suite at resolution 32", budget_s: Some(120.0), run: identities },
        Criterion { id: 2, name: "evolution equations: order-2 decay in δ", budget_s: Some(600.0), run: evolution },
        Criterion { id: 3, name: "flow integrator", budget_s: None, run: integrator },
        Criterion { id: 4, name: "doubling-time monitor", budget_s: Some(300.0), run: doubling },
        Criterion { id: 5, name: "curvature-condition algebra", budget_s: None, run: conditions },
        Criterion { id: 6, name: "heat flow and maximum-principle monitor", budget_s: None, run: heat },
        Criterion { id: 7, name: "resume, config round-trip, exit codes", budget_s: None, run: infrastructure },
    ];
    // `cargo test --test acceptance -- 2 5` runs only criteria 2 and 5.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected: Vec<&Criterion> = criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)).collect();
    let mut failed = 0;
    for cr in &selected {
        let start = Instant::now();
        let result = std::panic::catch_unwind(cr.run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let in_budget = cr.budget_s.is_none_or(|b| secs <= b);
        let (ok, lines) = match result {
            Ok(lines) => (lines.iter().all(|(ok, _)| *ok) && in_budget, lines),
            Err(e) => (false, vec![(false, format!("error: {e}"))]),
        };
        let timing = match cr.budget_s {
            Some(b) => format!("{secs:.1} s <= {b:.0} s"),
            None => format!("{secs:.1} s"),
        };
        println!("{} {}. {} [{timing}]", if ok { "PASS" } else { "FAIL" }, cr.id, cr.name);
        for (ok, text) in lines {
            println!("       {} {text}", if ok { "ok  " } else { "FAIL" });
        }
        if !ok {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", selected.len() - failed, selected.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
