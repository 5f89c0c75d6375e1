//! Doubling-time monitor: `sup(|Rm| + |T|² + |∇T|) ≤ 2K₀` on `[0, c₁/K₀]` and
//! the envelope `F_sup(t) ≤ (K₀⁻¹ − c₀t)⁻²`.

use num_complex::Complex64;
use serde::Serialize;

use crate::chern::{scalar_laplacian, tensor_norms, ChernPackage};
use crate::error::{HcfError, Result};
use crate::tensor::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingSample {
    pub t: f64,
    pub k_now: f64,
    pub f_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingMonitor {
    pub k0: f64,
    pub samples: Vec<DoublingSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub k0: f64,
    /// `c₁ / K₀`.
    pub window_end: f64,
    /// `sup(|Rm| + |T|² + |∇T|) ≤ 2K₀` at every sample in the window.
    pub within_2k0: bool,
    /// Largest `K_now / K₀` in the window.
    pub max_k_ratio: f64,
    /// Whether the samples reach the end of the window.
    pub window_covered: bool,
    /// Smallest `c₀ ≥ 0` with `F_sup(t) ≤ (K₀⁻¹ − c₀t)⁻²` at every sample.
    pub c0_fit: f64,
    /// The fitted bound dominates `F_sup` everywhere and `√bound ≤ 2K₀` on the window.
    pub envelope_ok: bool,
    /// Pointwise check of `(∂_t − Δ)F ≤ 2c₀F^{3/2}`, when computed from a trajectory.
    pub pde: Option<PdeCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeCheck {
    /// `sup_{t, x} [(∂_t − Δ)F − 2 c₀_fit F^{3/2}]` over interior samples.
    pub max_residual: f64,
    /// Smallest `c₀` for which the pointwise inequality holds on the samples
    /// (over points with `F` above `1e−12 · sup F`).
    pub c0_needed: f64,
    pub interior_samples: usize,
}

impl DoublingMonitor {
    pub fn new(k0: f64) -> Self {
        Self { k0, samples: Vec::new() }
    }

    /// Samples must arrive with strictly increasing `t`.
    pub fn record(&mut self, t: f64, k_now: f64, f_sup: f64) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(t > last.t) {
                return Err(HcfError::InvalidInput(format!("doubling sample at t = {t} not after {}", last.t)));
            }
        }
        self.samples.push(DoublingSample { t, k_now, f_sup: f_sup.max(0.0) });
        Ok(())
    }

    /// `(K₀⁻¹ − c₀ t)⁻²`, infinite past the blow-up time.
    pub fn bound(&self, c0: f64, t: f64) -> f64 {
        let d = 1.0 / self.k0 - c0 * t;
        if d > 0.0 {
            1.0 / (d * d)
        } else {
            f64::INFINITY
        }
    }

    pub fn c0_fit(&self) -> f64 {
        if self.k0 <= 0.0 {
            return 0.0;
        }
        self.samples
            .iter()
            .filter(|s| s.t > 0.0 && s.f_sup > 0.0)
            .map(|s| (1.0 / self.k0 - 1.0 / s.f_sup.sqrt()) / s.t)
            .fold(0.0, f64::max)
    }

    pub fn report(&self, c1: f64) -> DoublingReport {
        let k0 = self.k0;
        if k0 <= 0.0 {
            let flat = self.samples.iter().all(|s| s.k_now == 0.0 && s.f_sup == 0.0);
            return DoublingReport {
                k0,
                window_end: f64::INFINITY,
                within_2k0: flat,
                max_k_ratio: 0.0,
                window_covered: true,
                c0_fit: 0.0,
                envelope_ok: flat,
                pde: None,
            };
        }
        let window_end = c1 / k0;
        let in_window: Vec<&DoublingSample> = self.samples.iter().filter(|s| s.t <= window_end * (1.0 + 1e-12)).collect();
        let max_k_ratio = in_window.iter().map(|s| s.k_now / k0).fold(0.0, f64::max);
        let c0 = self.c0_fit();
        let dominates = self.samples.iter().all(|s| s.f_sup <= self.bound(c0, s.t) * (1.0 + 1e-12));
        let tight = self.bound(c0, window_end).sqrt() <= 2.0 * k0;
        DoublingReport {
            k0,
            window_end,
            within_2k0: max_k_ratio <= 2.0,
            max_k_ratio,
            window_covered: self.samples.last().is_some_and(|s| s.t >= window_end * (1.0 - 1e-12)),
            c0_fit: c0,
            envelope_ok: dominates && tight,
            pde: None,
        }
    }
}

/// Metrics recorded along a run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<(f64, MetricField)>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, g: MetricField) {
        self.states.push((t, g));
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the state recorded at `t` (relative tolerance 1e−9).
    pub fn find(&self, t: f64) -> Option<usize> {
        self.states
            .iter()
            .position(|(s, _)| (s - t).abs() <= 1e-9 * t.abs().max(1e-12))
    }
}

/// Recomputes the norms along a trajectory, runs the doubling report, and
/// checks the differential inequality pointwise with centered differences.
pub fn doubling_check(traj: &Trajectory, c1: f64) -> Result<DoublingReport> {
    if traj.len() < 3 {
        return Err(HcfError::InsufficientTrajectory { have: traj.len(), need: 3 });
    }
    let mut monitor: Option<DoublingMonitor> = None;
    let mut fields: Vec<Vec<f64>> = Vec::with_capacity(traj.len());
    let mut laps: Vec<Vec<f64>> = Vec::with_capacity(traj.len());
    for (t, g) in &traj.states {
        let pkg = ChernPackage::compute(g)?;
        let norms = tensor_norms(&pkg)?;
        let m = monitor.get_or_insert_with(|| DoublingMonitor::new(norms.k_now));
        m.record(*t, norms.k_now, norms.sup_f)?;
        let f: Vec<Complex64> = norms.f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        laps.push(scalar_laplacian(&f, &pkg.g_inverse)?.iter().map(|v| v.re).collect());
        fields.push(norms.f);
    }
    let monitor = monitor.expect("nonempty trajectory");
    let mut report = monitor.report(c1);
    let c0 = report.c0_fit;
    let mut max_residual = f64::NEG_INFINITY;
    let mut c0_needed: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let (tm, tp) = (traj.states[i - 1].0, traj.states[i + 1].0);
        let sup_f = fields[i].iter().cloned().fold(0.0, f64::max);
        for p in 0..fields[i].len() {
            let dtf = (fields[i + 1][p] - fields[i - 1][p]) / (tp - tm);
            let lhs = dtf - laps[i][p];
            let f32 = fields[i][p].powf(1.5);
            max_residual = max_residual.max(lhs - 2.0 * c0 * f32);
            if fields[i][p] > 1e-12 * sup_f && fields[i][p] > 0.0 {
                c0_needed = c0_needed.max(lhs / (2.0 * f32));
            }
        }
    }
    report.pde = Some(PdeCheck {
        max_residual,
        c0_needed,
        interior_samples: traj.len() - 2,
    });
    Ok(report)
}
