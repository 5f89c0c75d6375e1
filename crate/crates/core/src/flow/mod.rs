//! Time integration of `∂_t g = −S(g)` with curvature-based step control and
//! the run monitors.

mod checkpoint;
mod doubling;
mod heat;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chern::{inverse_metric, second_ricci_from_metric, tensor_norms, ChernPackage, NormReport};
use crate::conditions::{analyze_package, ConditionSettings, CurvatureReport};
use crate::error::{HcfError, Result};
use crate::linalg;
use crate::tensor::{MetricField, TensorField};

pub use checkpoint::{Checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use doubling::{doubling_check, DoublingMonitor, DoublingReport, DoublingSample, PdeCheck, Trajectory};
pub use heat::{
    bump, heat_rhs, heat_step, smp_max_eigenvalue, smp_monitor, HeatScheme, HeatState, SmpMonitor,
    POSITIVITY_FLOOR,
};

/// Largest `|λ| dt` on the negative real axis kept inside the RK4 stability region (≈ 2.785).
const RK4_REAL_STABILITY: f64 = 2.5;

/// Flow state with a lazily computed curvature package.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub step: u64,
    pub g: MetricField,
    pkg: Option<(f64, u64, Arc<ChernPackage>)>,
}

impl FlowState {
    pub fn new(g: MetricField) -> Self {
        Self::at(g, 0.0, 0)
    }

    pub fn at(g: MetricField, t: f64, step: u64) -> Self {
        Self { t, step, g, pkg: None }
    }

    /// Recomputes the package if it is missing or belongs to another time.
    pub fn refresh(&mut self) -> Result<&ChernPackage> {
        let fresh = matches!(&self.pkg, Some((t, s, _)) if *t == self.t && *s == self.step);
        if !fresh {
            self.pkg = Some((self.t, self.step, Arc::new(ChernPackage::compute(&self.g)?)));
        }
        Ok(&self.pkg.as_ref().expect("just computed").2)
    }

    /// The cached package; errors if it was never computed or is out of date.
    pub fn package(&self) -> Result<&ChernPackage> {
        match &self.pkg {
            Some((t, s, p)) if *t == self.t && *s == self.step => Ok(p),
            Some((t, _, _)) => Err(HcfError::StalePackage {
                package_t: *t,
                state_t: self.t,
            }),
            None => Err(HcfError::StalePackage {
                package_t: f64::NAN,
                state_t: self.t,
            }),
        }
    }
}

/// Hermitian part of `−S(g)`. The discrete `S` carries an aliasing-size
/// non-Hermitian part; projecting every stage keeps RK4 at fourth order.
/// Stage metrics are not validated; the inverse fails on loss of positivity.
pub fn velocity(g: &MetricField) -> Result<TensorField> {
    let mut v = MetricField::from_field_unchecked(second_ricci_from_metric(g)?.scale(Complex64::new(-1.0, 0.0)));
    v.symmetrize();
    Ok(v.into_field())
}

fn axpy(base: &TensorField, k: &TensorField, c: f64) -> Result<MetricField> {
    let mut out = base.clone();
    out.add_assign(&k.scale(Complex64::new(c, 0.0)))?;
    Ok(MetricField::from_field_unchecked(out))
}

/// One classical RK4 step of `∂_t g = −S(g)`, followed by Hermitian
/// re-symmetrization and a positivity check at every point.
pub fn step_hcf(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(HcfError::InvalidInput(format!("flow step needs dt > 0, got {dt}")));
    }
    let t_new = state.t + dt;
    let g0 = state.g.field();
    let stage = |r: Result<TensorField>| {
        r.map_err(|e| match e {
            HcfError::SingularMetric { point, min_eigenvalue } => HcfError::PositivityLoss {
                t: t_new,
                point,
                min_eigenvalue,
            },
            other => other,
        })
    };
    let k1 = stage(velocity(&state.g))?;
    let k2 = stage(velocity(&axpy(g0, &k1, dt / 2.0)?))?;
    let k3 = stage(velocity(&axpy(g0, &k2, dt / 2.0)?))?;
    let k4 = stage(velocity(&axpy(g0, &k3, dt)?))?;
    let mut g = g0.clone();
    g.add_assign(&k1.scale(Complex64::new(dt / 6.0, 0.0)))?;
    g.add_assign(&k2.scale(Complex64::new(dt / 3.0, 0.0)))?;
    g.add_assign(&k3.scale(Complex64::new(dt / 3.0, 0.0)))?;
    g.add_assign(&k4.scale(Complex64::new(dt / 6.0, 0.0)))?;
    if !g.is_finite() {
        return Err(HcfError::NonFinite { t: t_new });
    }
    let mut g = MetricField::from_field_unchecked(g);
    g.symmetrize();
    for p in 0..g.grid().num_points() {
        let m = g.matrix_at(p);
        if linalg::cholesky_lower(&m).is_none() {
            return Err(HcfError::PositivityLoss {
                t: t_new,
                point: p,
                min_eigenvalue: linalg::min_hermitian_eigenvalue(&m),
            });
        }
    }
    Ok(FlowState::at(g, t_new, state.step + 1))
}

/// Explicit-stability bound `safety · 2.5 / λ`, with `λ = sup tr(g⁻¹) · ¼ Σ_α max|∂_α²|`
/// estimating the stiffest mode of the linearized flow (and of the heat equation).
pub fn stability_cap(g: &MetricField, safety: f64) -> Result<f64> {
    let ginv = inverse_metric(g)?;
    let n = g.n();
    let np = g.grid().num_points();
    let trace = (0..np)
        .map(|p| (0..n).map(|i| ginv.comp_at(&[i, i])[p].re).sum::<f64>())
        .fold(0.0, f64::max);
    let grid = g.grid();
    let symbol: f64 = (0..grid.real_dims()).map(|a| grid.second_derivative_bound(a)).sum();
    let lambda = trace * 0.25 * symbol;
    Ok(if lambda > 0.0 {
        safety * RK4_REAL_STABILITY / lambda
    } else {
        f64::INFINITY
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub c1: f64,
    pub safety: f64,
    pub max_dt: f64,
    pub min_dt: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            c1: 0.5,
            safety: 0.5,
            max_dt: 1e-2,
            min_dt: 1e-12,
        }
    }
}

impl StepController {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(HcfError::InvalidInput(format!("safety must lie in (0, 1), got {}", self.safety)));
        }
        if !(self.c1 > 0.0) {
            return Err(HcfError::InvalidInput(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.min_dt > 0.0 && self.min_dt <= self.max_dt) {
            return Err(HcfError::InvalidInput(format!(
                "need 0 < min_dt <= max_dt, got min_dt = {}, max_dt = {}",
                self.min_dt, self.max_dt
            )));
        }
        Ok(())
    }

    /// `safety · c₁ / K_now`, infinite on flat data.
    pub fn rule(&self, k_now: f64) -> f64 {
        if k_now > 0.0 {
            self.safety * self.c1 / k_now
        } else {
            f64::INFINITY
        }
    }

    /// `min(rule, max_dt, cap)`; errors if that falls below `min_dt`.
    pub fn next_dt(&self, k_now: f64, cap: f64) -> Result<f64> {
        let dt = self.rule(k_now).min(self.max_dt).min(cap);
        if dt < self.min_dt {
            return Err(HcfError::StepUnderflow {
                requested: dt,
                min_dt: self.min_dt,
            });
        }
        Ok(dt)
    }
}

#[derive(Debug, Clone)]
pub struct HeatSettings {
    pub phi0: Vec<f64>,
    pub k: f64,
    pub b: f64,
    pub epsilon: f64,
    pub scheme: HeatScheme,
}

#[derive(Debug, Clone)]
pub struct FlowSettings {
    pub t_end: f64,
    pub controller: StepController,
    /// Stop after this many accepted steps (counted from step 0).
    pub max_steps: Option<u64>,
    /// Condition analysis at every record; `None` skips it.
    pub conditions: Option<ConditionSettings>,
}

/// One row of the run time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    /// Step that led to this state (0 for the initial state).
    pub dt: f64,
    pub sup_rm: f64,
    pub sup_torsion_sq: f64,
    pub sup_grad_torsion: f64,
    pub f_sup: f64,
    pub k_now: f64,
    pub max_ricci_eigenvalue: Option<f64>,
    pub griffiths_kappa: Option<f64>,
    pub pinch_margin: Option<f64>,
    pub min_phi: Option<f64>,
    pub max_eig_a: Option<f64>,
}

/// Receives every record; errors abort the run and propagate.
pub trait FlowObserver {
    fn on_record(&mut self, record: &StepRecord, state: &FlowState, heat: Option<&HeatState>) -> Result<()>;
}

impl FlowObserver for () {
    fn on_record(&mut self, _: &StepRecord, _: &FlowState, _: Option<&HeatState>) -> Result<()> {
        Ok(())
    }
}

/// Collects every state, e.g. for `doubling_check` or evolution checks.
impl FlowObserver for Trajectory {
    fn on_record(&mut self, record: &StepRecord, state: &FlowState, _: Option<&HeatState>) -> Result<()> {
        self.push(record.t, state.g.clone());
        Ok(())
    }
}

#[derive(Debug)]
pub struct FlowOutcome {
    pub state: FlowState,
    pub heat: Option<HeatState>,
    pub smp: Option<SmpMonitor>,
    pub doubling: DoublingMonitor,
    pub records: Vec<StepRecord>,
    pub last_report: Option<CurvatureReport>,
    /// Numerical reason the run stopped before `t_end`.
    pub abort: Option<HcfError>,
}

impl FlowOutcome {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

struct Monitors {
    norms: NormReport,
    report: Option<CurvatureReport>,
}

fn measure(state: &mut FlowState, settings: &FlowSettings) -> Result<Monitors> {
    let t = state.t;
    let pkg = state.refresh()?;
    let norms = tensor_norms(pkg)?;
    let report = match &settings.conditions {
        Some(c) => Some(analyze_package(pkg, t, c)?),
        None => None,
    };
    Ok(Monitors { norms, report })
}

fn record_of(state: &FlowState, dt: f64, m: &Monitors, heat: Option<(&HeatState, f64)>) -> StepRecord {
    StepRecord {
        step: state.step,
        t: state.t,
        dt,
        sup_rm: m.norms.sup_rm,
        sup_torsion_sq: m.norms.sup_torsion_sq,
        sup_grad_torsion: m.norms.sup_grad_torsion,
        f_sup: m.norms.sup_f,
        k_now: m.norms.k_now,
        max_ricci_eigenvalue: m.report.as_ref().map(|r| r.max_ricci_eigenvalue),
        griffiths_kappa: m.report.as_ref().map(|r| r.griffiths.max),
        pinch_margin: m.report.as_ref().map(|r| r.pinch.min_ricci_margin),
        min_phi: heat.map(|(h, _)| h.min()),
        max_eig_a: heat.map(|(_, a)| a),
    }
}

/// Runs from `initial` to `settings.t_end`. `k0` is the initial
/// `sup(|Rm| + |T|² + |∇T|)` of the whole run (it differs from the current
/// value on resumed runs). Numerical failures end the run and are returned in
/// [`FlowOutcome::abort`]; observer errors are returned as `Err`.
pub fn run_flow(
    initial: FlowState,
    heat: Option<(HeatState, SmpMonitor)>,
    heat_scheme: HeatScheme,
    k0: f64,
    settings: &FlowSettings,
    observer: &mut dyn FlowObserver,
) -> Result<FlowOutcome> {
    settings.controller.validate()?;
    if !(settings.t_end >= initial.t) {
        return Err(HcfError::InvalidInput(format!(
            "t_end = {} precedes the start time {}",
            settings.t_end, initial.t
        )));
    }
    let mut state = initial;
    let (mut heat, mut smp) = match heat {
        Some((h, m)) => (Some(h), Some(m)),
        None => (None, None),
    };
    let mut doubling = DoublingMonitor::new(k0);
    let mut records = Vec::new();

    let mut monitors = measure(&mut state, settings)?;
    let observe_heat = |state: &FlowState, heat: &Option<HeatState>, smp: &mut Option<SmpMonitor>| -> Result<Option<f64>> {
        match (heat, smp) {
            (Some(h), Some(m)) => Ok(Some(m.observe(state, h)?)),
            _ => Ok(None),
        }
    };
    if state.step == 0 {
        let a = observe_heat(&state, &heat, &mut smp)?;
        let rec = record_of(&state, 0.0, &monitors, heat.as_ref().zip(a));
        doubling.record(rec.t, rec.k_now, rec.f_sup)?;
        observer.on_record(&rec, &state, heat.as_ref())?;
        records.push(rec);
    }

    let mut abort = None;
    loop {
        let remaining = settings.t_end - state.t;
        if remaining <= 1e-14 * settings.t_end.abs().max(1.0) {
            break;
        }
        if settings.max_steps.is_some_and(|m| state.step >= m) {
            break;
        }
        let attempt = (|| -> Result<(FlowState, Option<HeatState>, f64)> {
            let cap = stability_cap(&state.g, settings.controller.safety)?;
            let mut dt = settings.controller.next_dt(monitors.norms.k_now, cap)?;
            if dt >= remaining {
                dt = remaining;
            }
            let next = step_hcf(&state, dt)?;
            let next_heat = match &heat {
                Some(h) => Some(HeatState {
                    t: next.t,
                    phi: heat_step(&h.phi, &state.g, dt, heat_scheme)?,
                }),
                None => None,
            };
            Ok((next, next_heat, dt))
        })();
        let (next, next_heat, dt) = match attempt {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                abort = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        state = next;
        heat = next_heat;
        monitors = match measure(&mut state, settings) {
            Ok(m) => m,
            Err(e) if e.is_numerical() => {
                abort = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let a = observe_heat(&state, &heat, &mut smp)?;
        let rec = record_of(&state, dt, &monitors, heat.as_ref().zip(a));
        doubling.record(rec.t, rec.k_now, rec.f_sup)?;
        observer.on_record(&rec, &state, heat.as_ref())?;
        records.push(rec);
    }
    Ok(FlowOutcome {
        state,
        heat,
        smp,
        doubling,
        records,
        last_report: monitors.report,
        abort,
    })
}

/// Initial heat state and SMP monitor for a run starting at `state`.
pub fn start_heat(state: &mut FlowState, settings: &HeatSettings) -> Result<(HeatState, SmpMonitor)> {
    let np = state.g.grid().num_points();
    if settings.phi0.len() != np {
        return Err(HcfError::GridMismatch);
    }
    state.refresh()?;
    let pkg = state.package()?;
    let monitor = SmpMonitor::new(settings.k, settings.b, settings.epsilon, &pkg.ric_first, &state.g, &settings.phi0)?;
    Ok((
        HeatState {
            t: state.t,
            phi: settings.phi0.clone(),
        },
        monitor,
    ))
}
