//! Heat equation `∂_t φ = g^{rs̄} ∂_r ∂_s̄ φ` along the flow and the
//! strong-maximum-principle tensor `Aᵉ = Ric + e^{−kt} φ² g − ε e^{Bt} g`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chern::{inverse_metric, scalar_laplacian};
use crate::conditions::ricci_eigenvalues;
use crate::error::{HcfError, Result};
use crate::grid::TorusGrid;
use crate::tensor::{MetricField, TensorField};

use super::FlowState;

/// Negative values tolerated before a step counts as a positivity loss.
pub const POSITIVITY_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HeatScheme {
    /// Explicit RK4 on the spectral Laplacian; accurate, not positivity preserving.
    SpectralRk4,
    /// Backward Euler on a positive-coefficient second-order stencil.
    #[default]
    Monotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub t: f64,
    pub phi: Vec<f64>,
}

impl HeatState {
    pub fn min(&self) -> f64 {
        self.phi.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Smooth compactly supported bump `h · exp(1 − 1/(1 − ρ²))`, `ρ` the periodic
/// distance to the grid center over `radius`.
pub fn bump(grid: &TorusGrid, radius: f64, height: f64) -> Vec<f64> {
    let center: Vec<f64> = grid.periods().iter().map(|p| p / 2.0).collect();
    (0..grid.num_points())
        .map(|p| {
            let x = grid.coordinates(p);
            let d2: f64 = x
                .iter()
                .zip(&center)
                .zip(grid.periods())
                .map(|((xi, ci), per)| {
                    let d = (xi - ci).rem_euclid(*per);
                    let d = d.min(per - d);
                    d * d
                })
                .sum();
            let rho2 = d2 / (radius * radius);
            if rho2 < 1.0 {
                height * (1.0 - 1.0 / (1.0 - rho2)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// `Re g^{rs̄} ∂_r ∂_s̄ φ` (real for real `φ`).
pub fn heat_rhs(phi: &[f64], g_inverse: &TensorField) -> Result<Vec<f64>> {
    let f: Vec<Complex64> = phi.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    Ok(scalar_laplacian(&f, g_inverse)?.iter().map(|v| v.re).collect())
}

/// One heat step using the metric of `g` for the whole step.
pub fn heat_step(phi: &[f64], g: &MetricField, dt: f64, scheme: HeatScheme) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(HcfError::InvalidInput(format!("heat step needs dt > 0, got {dt}")));
    }
    let g_inverse = inverse_metric(g)?;
    let out = match scheme {
        HeatScheme::SpectralRk4 => rk4(phi, &g_inverse, dt)?,
        HeatScheme::Monotone => backward_euler(phi, g.grid(), &g_inverse, dt)?,
    };
    let min = out.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(HcfError::NonFinite { t: f64::NAN });
    }
    let had_nonnegative = phi.iter().all(|v| *v >= POSITIVITY_FLOOR);
    if had_nonnegative && min < POSITIVITY_FLOOR {
        return Err(HcfError::HeatPositivity { min });
    }
    Ok(out)
}

fn rk4(phi: &[f64], g_inverse: &TensorField, dt: f64) -> Result<Vec<f64>> {
    let stage = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> { base.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let k1 = heat_rhs(phi, g_inverse)?;
    let k2 = heat_rhs(&stage(phi, &k1, dt / 2.0), g_inverse)?;
    let k3 = heat_rhs(&stage(phi, &k2, dt / 2.0), g_inverse)?;
    let k4 = heat_rhs(&stage(phi, &k3, dt), g_inverse)?;
    Ok((0..phi.len())
        .map(|p| phi[p] + dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]))
        .collect())
}

/// Positive-type stencil of the real operator behind `Re g^{rs̄} ∂_r ∂_s̄`:
/// per point a list of `(neighbor, coefficient ≥ 0)`; the center weight is
/// minus their sum.
fn monotone_stencil(grid: &TorusGrid, g_inverse: &TensorField) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = grid.n();
    let d = 2 * n;
    let np = grid.num_points();
    let h: Vec<f64> = (0..d).map(|a| grid.spacing(a)).collect();
    let mut stencils = Vec::with_capacity(np);
    let mut a = DMatrix::<f64>::zeros(d, d);
    for p in 0..np {
        // g^{rs̄} = P + iQ; operator ¼ Σ [P_rs (∂x_r∂x_s + ∂y_r∂y_s) − Q_rs (∂x_r∂y_s − ∂y_r∂x_s)]
        a.fill(0.0);
        for r in 0..n {
            for s in 0..n {
                let hrs = g_inverse.comp_at(&[r, s])[p];
                a[(2 * r, 2 * s)] += 0.25 * hrs.re;
                a[(2 * r + 1, 2 * s + 1)] += 0.25 * hrs.re;
                a[(2 * r, 2 * s + 1)] -= 0.25 * hrs.im;
                a[(2 * s + 1, 2 * r)] -= 0.25 * hrs.im;
            }
        }
        let a = (&a + a.transpose()) * 0.5;
        let mut nb: Vec<(usize, f64)> = Vec::new();
        for al in 0..d {
            let mut axis = a[(al, al)] / (h[al] * h[al]);
            for be in 0..d {
                if be != al {
                    axis -= a[(al, be)].abs() / (h[al] * h[be]);
                }
            }
            if axis < -1e-14 * a[(al, al)].abs() / (h[al] * h[al]) {
                return Err(HcfError::NotMonotone { point: p });
            }
            let axis = axis.max(0.0);
            nb.push((grid.shifted(p, al, 1), axis));
            nb.push((grid.shifted(p, al, -1), axis));
            for be in (al + 1)..d {
                let b = 2.0 * a[(al, be)];
                if b == 0.0 {
                    continue;
                }
                let w = b.abs() / (2.0 * h[al] * h[be]);
                let sgn = if b > 0.0 { 1 } else { -1 };
                let q1 = grid.shifted(grid.shifted(p, al, 1), be, sgn);
                let q2 = grid.shifted(grid.shifted(p, al, -1), be, -sgn);
                nb.push((q1, w));
                nb.push((q2, w));
            }
        }
        stencils.push(nb);
    }
    Ok(stencils)
}

fn backward_euler(phi: &[f64], grid: &TorusGrid, g_inverse: &TensorField, dt: f64) -> Result<Vec<f64>> {
    let stencils = monotone_stencil(grid, g_inverse)?;
    let scale = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut x = phi.to_vec();
    // Gauss–Seidel on (1 + dt Σc) x_p − dt Σ c x_nb = φ_p; every coefficient is
    // nonnegative, so iterates stay nonnegative and converge.
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for (p, nb) in stencils.iter().enumerate() {
            let (mut acc, mut total) = (0.0, 0.0);
            for &(q, c) in nb {
                acc += c * x[q];
                total += c;
            }
            let v = (phi[p] + dt * acc) / (1.0 + dt * total);
            change = change.max((v - x[p]).abs());
            x[p] = v;
        }
        if change <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Largest generalized eigenvalue of `Aᵉ = Ric + e^{−kt} φ² g − ε e^{Bt} g`
/// over the grid, and where it is attained.
pub fn smp_max_eigenvalue(
    ric: &TensorField,
    g: &MetricField,
    phi: &[f64],
    t: f64,
    k: f64,
    b: f64,
    epsilon: f64,
) -> Result<(f64, usize)> {
    let n = g.n();
    let np = g.grid().num_points();
    if phi.len() != np {
        return Err(HcfError::GridMismatch);
    }
    let shift = epsilon * (b * t).exp();
    let decay = (-k * t).exp();
    let (mut best, mut at) = (f64::NEG_INFINITY, 0);
    for p in 0..np {
        let gm = g.matrix_at(p);
        let s = decay * phi[p] * phi[p] - shift;
        let a = DMatrix::from_fn(n, n, |i, j| ric.comp_at(&[i, j])[p] + gm[(i, j)] * s);
        let ev = ricci_eigenvalues(&a, &gm)?;
        if ev[n - 1] > best {
            best = ev[n - 1];
            at = p;
        }
    }
    Ok((best, at))
}

/// `max eig Aᵉ` for a flow state with a fresh package and a heat field at the same time.
pub fn smp_monitor(state: &FlowState, heat: &HeatState, k: f64, b: f64, epsilon: f64) -> Result<f64> {
    if (heat.t - state.t).abs() > 1e-12 * state.t.abs().max(1.0) {
        return Err(HcfError::Unsynchronized {
            phi_t: heat.t,
            state_t: state.t,
        });
    }
    let pkg = state.package()?;
    Ok(smp_max_eigenvalue(&pkg.ric_first, &state.g, &heat.phi, state.t, k, b, epsilon)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SmpMonitor {
    pub k: f64,
    pub b: f64,
    pub epsilon: f64,
    /// The initial data satisfies `Ric + φ0² g ≤ 0`, so `max eig Aᵉ ≤ 0` is asserted along the run.
    pub assertion_mode: bool,
    pub series: Vec<(f64, f64)>,
    /// First `(t, max eig Aᵉ)` with a positive value while in assertion mode.
    pub violation: Option<(f64, f64)>,
}

impl SmpMonitor {
    /// Decides assertion mode from `max eig(Ric + φ0² g)` at the initial state.
    pub fn new(k: f64, b: f64, epsilon: f64, ric0: &TensorField, g0: &MetricField, phi0: &[f64]) -> Result<Self> {
        let (hyp, _) = smp_max_eigenvalue(ric0, g0, phi0, 0.0, 0.0, 0.0, 0.0)?;
        Ok(Self::with_mode(k, b, epsilon, hyp <= 0.0))
    }

    pub fn with_mode(k: f64, b: f64, epsilon: f64, assertion_mode: bool) -> Self {
        Self {
            k,
            b,
            epsilon,
            assertion_mode,
            series: Vec::new(),
            violation: None,
        }
    }

    pub fn observe(&mut self, state: &FlowState, heat: &HeatState) -> Result<f64> {
        let v = smp_monitor(state, heat, self.k, self.b, self.epsilon)?;
        self.series.push((state.t, v));
        if self.assertion_mode && v > 0.0 && self.violation.is_none() {
            self.violation = Some((state.t, v));
        }
        Ok(v)
    }
}
