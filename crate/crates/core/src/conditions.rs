//! Pointwise curvature-condition analysis: the Griffiths form, Ricci spectra,
//! the ε-shifted tensor `Rᵉ = R − εB`, and the pinching margins.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chern::{ChernPackage, RM_SIGNATURE};
use crate::error::{HcfError, Result};
use crate::linalg;
use crate::tensor::{comp_index, MetricField, TensorField};

/// Absolute tolerance for "nonpositive" on unit-normalized quantities.
pub const NONPOSITIVE_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Deterministic per-point generator derived from a run seed.
pub fn point_rng(seed: u64, point: usize, salt: u64) -> ChaCha8Rng {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(point as u64 + 1) ^ salt.rotate_left(32);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Uniformly distributed direction in `ℂⁿ`, normalized so that `g(v, v̄) = 1`.
pub fn random_unit(rng: &mut impl Rng, g: &DMatrix<Complex64>) -> DVector<Complex64> {
    let n = g.nrows();
    loop {
        let v = DVector::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let r = v.norm();
        if r <= 1.0 && r > 1e-3 {
            return normalize(&v, g);
        }
    }
}

/// `g(v, v̄) = g_{ij̄} v^i conj(v^j)`.
pub fn metric_norm_sq(v: &DVector<Complex64>, g: &DMatrix<Complex64>) -> f64 {
    let mut s = ZERO;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += g[(i, j)] * v[i] * v[j].conj();
        }
    }
    s.re
}

pub fn normalize(v: &DVector<Complex64>, g: &DMatrix<Complex64>) -> DVector<Complex64> {
    v / Complex64::new(metric_norm_sq(v, g).sqrt(), 0.0)
}

/// `B_{ij̄kl̄} = g_{ij̄} g_{kl̄} + g_{il̄} g_{kj̄}` at one point, flat at `(i, j, k, l)`.
pub fn b_point(g: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = g.nrows();
    let mut out = vec![ZERO; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[((i * n + j) * n + k) * n + l] = g[(i, j)] * g[(k, l)] + g[(i, l)] * g[(k, j)];
                }
            }
        }
    }
    out
}

/// Curvature-type tensor `R_{ij̄kl̄}` and metric at one point.
#[derive(Debug, Clone)]
pub struct PointCurvature {
    pub rm: Vec<Complex64>,
    pub g: DMatrix<Complex64>,
}

impl PointCurvature {
    pub fn new(rm: Vec<Complex64>, g: DMatrix<Complex64>) -> Result<Self> {
        let n = g.nrows();
        if rm.len() != n.pow(4) {
            return Err(HcfError::InvalidInput(format!("expected {} curvature entries, got {}", n.pow(4), rm.len())));
        }
        Ok(Self { rm, g })
    }

    /// `R = −B[g]`.
    pub fn minus_b(g: DMatrix<Complex64>) -> Self {
        let rm = b_point(&g).into_iter().map(|v| -v).collect();
        Self { rm, g }
    }

    pub fn from_field(rm_lowered: &TensorField, g: &MetricField, point: usize) -> Self {
        Self {
            rm: rm_lowered.point_values(point),
            g: g.matrix_at(point),
        }
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn at(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.n();
        self.rm[((i * n + j) * n + k) * n + l]
    }

    /// `R(u, v̄, x, w̄) = R_{ij̄kl̄} u^i conj(v^j) x^k conj(w^l)`.
    pub fn eval4(
        &self,
        u: &DVector<Complex64>,
        v: &DVector<Complex64>,
        x: &DVector<Complex64>,
        w: &DVector<Complex64>,
    ) -> Complex64 {
        let n = self.n();
        let mut s = ZERO;
        for i in 0..n {
            for j in 0..n {
                let a = u[i] * v[j].conj();
                for k in 0..n {
                    for l in 0..n {
                        s += self.at(i, j, k, l) * a * x[k] * w[l].conj();
                    }
                }
            }
        }
        s
    }

    /// `R(X, X̄, Y, Ȳ)`.
    pub fn form(&self, x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
        self.eval4(x, x, y, y)
    }

    /// `max |conj(R_{ij̄kl̄}) − R_{jīlk̄}|`.
    pub fn conjugation_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self.at(i, j, k, l).conj() - self.at(j, i, l, k)).norm());
                    }
                }
            }
        }
        worst
    }

    /// `½(R_{ij̄kl̄} + conj(R_{jīlk̄}))`: removes the conjugation defect a
    /// discretized field carries.
    pub fn conjugation_symmetrized(&self) -> Self {
        let n = self.n();
        let mut rm = self.rm.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        rm[((i * n + j) * n + k) * n + l] = (self.at(i, j, k, l) + self.at(j, i, l, k).conj()) * 0.5;
                    }
                }
            }
        }
        Self { rm, g: self.g.clone() }
    }

    /// `R_{ij̄} = g^{kl̄} R_{ij̄kl̄}` as a matrix `[i][j]`.
    pub fn ricci(&self) -> Result<DMatrix<Complex64>> {
        let n = self.n();
        let ginv = linalg::inverse(&self.g).ok_or_else(|| HcfError::SingularMetric {
            point: 0,
            min_eigenvalue: linalg::min_hermitian_eigenvalue(&self.g),
        })?;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let mut s = ZERO;
            for k in 0..n {
                for l in 0..n {
                    // g^{kl̄} = (G⁻¹)[l][k]
                    s += ginv[(l, k)] * self.at(i, j, k, l);
                }
            }
            s
        }))
    }

    /// `R − εB`.
    pub fn shifted(&self, epsilon: f64) -> Self {
        let b = b_point(&self.g);
        let rm = self.rm.iter().zip(&b).map(|(r, b)| r - b * epsilon).collect();
        Self { rm, g: self.g.clone() }
    }

    /// Hermitian matrix of `X ↦ R(X, X̄, Y, Ȳ)` in the basis used by the pencil.
    fn matrix_in_first(&self, y: &DVector<Complex64>) -> DMatrix<Complex64> {
        let n = self.n();
        // M[i][j] = Σ R_{ij̄kl̄} y^k conj(y^l); form = X^H Mᵀ X
        let m = DMatrix::from_fn(n, n, |i, j| {
            let mut s = ZERO;
            for k in 0..n {
                for l in 0..n {
                    s += self.at(i, j, k, l) * y[k] * y[l].conj();
                }
            }
            s
        });
        m.transpose()
    }

    fn matrix_in_second(&self, x: &DVector<Complex64>) -> DMatrix<Complex64> {
        let n = self.n();
        let m = DMatrix::from_fn(n, n, |k, l| {
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    s += self.at(i, j, k, l) * x[i] * x[j].conj();
                }
            }
            s
        });
        m.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GriffithsSettings {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for GriffithsSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iterations: 100,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GriffithsPoint {
    /// Best value of `R(X, X̄, Y, Ȳ)` over `g`-unit pairs found.
    pub kappa: f64,
    pub x: DVector<Complex64>,
    pub y: DVector<Complex64>,
    /// Every restart reached the fixed-point tolerance before the iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    /// Largest value among the random starting pairs (a lower bound the result dominates).
    pub best_start: f64,
}

/// Maximizes `R(X, X̄, Y, Ȳ)` over `g`-unit `X`, `Y` by alternating
/// generalized-eigenvector ascent from random starts.
pub fn griffiths_extremum(
    pc: &PointCurvature,
    settings: &GriffithsSettings,
    rng: &mut impl Rng,
) -> Result<GriffithsPoint> {
    let defect = pc.conjugation_defect();
    let scale = pc.rm.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if defect > 1e-9 * scale {
        return Err(HcfError::NonHermitian { point: 0, defect });
    }
    let g = &pc.g;
    let gt = g.transpose();
    let top = |a: &DMatrix<Complex64>| -> Result<(f64, DVector<Complex64>)> {
        let (vals, vecs) = linalg::generalized_eigen(&linalg::hermitian_part(a), &gt).ok_or(HcfError::SingularMetric {
            point: 0,
            min_eigenvalue: linalg::min_hermitian_eigenvalue(g),
        })?;
        let last = vals.len() - 1;
        Ok((vals[last], vecs.column(last).into_owned()))
    };
    let mut best: Option<GriffithsPoint> = None;
    let mut all_converged = true;
    let mut total_iterations = 0;
    let mut best_start = f64::NEG_INFINITY;
    for _ in 0..settings.restarts.max(1) {
        let mut x = random_unit(rng, g);
        let mut y = random_unit(rng, g);
        let mut value = pc.form(&x, &y).re;
        best_start = best_start.max(value);
        let mut converged = false;
        for _ in 0..settings.max_iterations {
            total_iterations += 1;
            let (_, nx) = top(&pc.matrix_in_first(&y))?;
            x = normalize(&nx, g);
            let (v, ny) = top(&pc.matrix_in_second(&x))?;
            y = normalize(&ny, g);
            let change = (v - value).abs();
            value = v.max(value);
            if change <= settings.tolerance * (1.0 + v.abs()) {
                converged = true;
                break;
            }
        }
        let value = pc.form(&x, &y).re;
        all_converged &= converged;
        if best.as_ref().is_none_or(|b| value > b.kappa) {
            best = Some(GriffithsPoint {
                kappa: value,
                x,
                y,
                converged: false,
                iterations: 0,
                restarts: 0,
                best_start: 0.0,
            });
        }
    }
    let mut out = best.expect("at least one restart");
    out.converged = all_converged;
    out.iterations = total_iterations;
    out.restarts = settings.restarts.max(1);
    out.best_start = best_start;
    Ok(out)
}

/// `κ` with `R(X, X̄, Y, Ȳ) ≤ κ B(X, X̄, Y, Ȳ)` for unit pairs, given `κ̂ ≤ 0`:
/// `1 ≤ B ≤ 2` on unit pairs, so `κ = κ̂ / 2` works.
pub fn kappa_bound(kappa_hat: f64) -> Option<f64> {
    (kappa_hat <= 0.0).then_some(kappa_hat / 2.0)
}

#[derive(Debug, Clone)]
pub struct EpsilonShift {
    pub epsilon: f64,
    pub b: TensorField,
    pub r_eps: TensorField,
    /// `max |g^{kl̄} B_{ij̄kl̄} − (n+1) g_{ij̄}|`.
    pub trace_residual: f64,
}

/// `B[g]` as a grid field.
pub fn b_tensor(g: &MetricField) -> TensorField {
    let n = g.n();
    let np = g.grid().num_points();
    let mut b = TensorField::zeros(g.grid(), &RM_SIGNATURE);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let c = comp_index(n, &[i, j, k, l]);
                    let (gij, gkl, gil, gkj) = (
                        g.field().comp_at(&[i, j]),
                        g.field().comp_at(&[k, l]),
                        g.field().comp_at(&[i, l]),
                        g.field().comp_at(&[k, j]),
                    );
                    let out: Vec<Complex64> = (0..np).map(|p| gij[p] * gkl[p] + gil[p] * gkj[p]).collect();
                    b.comp_mut(c).copy_from_slice(&out);
                }
            }
        }
    }
    b
}

/// `max |g^{kl̄} B_{ij̄kl̄} − (n+1) g_{ij̄}|` over the grid.
pub fn b_trace_residual(b: &TensorField, g: &MetricField, g_inverse: &TensorField) -> Result<f64> {
    let trace = crate::chern::first_ricci_trace(b, g_inverse)?;
    let expect = g.field().scale(Complex64::new(g.n() as f64 + 1.0, 0.0));
    trace.max_diff(&expect)
}

pub fn eps_shift(rm_lowered: &TensorField, g: &MetricField, g_inverse: &TensorField, epsilon: f64) -> Result<EpsilonShift> {
    if !(epsilon >= 0.0) {
        return Err(HcfError::InvalidInput(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    rm_lowered.check_signature(&RM_SIGNATURE)?;
    let b = b_tensor(g);
    let trace_residual = b_trace_residual(&b, g, g_inverse)?;
    let scale = g.field().max_abs().max(1.0);
    if trace_residual > 1e-10 * scale {
        return Err(HcfError::InvalidInput(format!("B trace identity violated by {trace_residual:e}")));
    }
    let mut r_eps = rm_lowered.clone();
    if epsilon != 0.0 {
        r_eps.add_assign(&b.scale(Complex64::new(-epsilon, 0.0)))?;
    }
    Ok(EpsilonShift {
        epsilon,
        b,
        r_eps,
        trace_residual,
    })
}

/// Ascending generalized eigenvalues of `(Ric, g)` at one point.
pub fn ricci_eigenvalues(ric: &DMatrix<Complex64>, g: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    linalg::generalized_eigenvalues(&linalg::hermitian_part(ric), g).ok_or_else(|| HcfError::SingularMetric {
        point: 0,
        min_eigenvalue: linalg::min_hermitian_eigenvalue(g),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciSpectrum {
    /// Per point, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
    pub max: f64,
    pub argmax: usize,
    /// Smallest per-point largest eigenvalue and where it is attained.
    pub min_of_max: f64,
    pub argmin_of_max: usize,
}

pub fn ricci_spectrum(ric: &TensorField, g: &MetricField) -> Result<RicciSpectrum> {
    ric.check_grid(g.field())?;
    let n = g.n();
    let np = g.grid().num_points();
    let mut eigenvalues = Vec::with_capacity(np);
    let (mut max, mut argmax) = (f64::NEG_INFINITY, 0);
    let (mut min_of_max, mut argmin_of_max) = (f64::INFINITY, 0);
    for p in 0..np {
        let r = DMatrix::from_fn(n, n, |i, j| ric.comp_at(&[i, j])[p]);
        let ev = ricci_eigenvalues(&r, &g.matrix_at(p)).map_err(|_| HcfError::SingularMetric {
            point: p,
            min_eigenvalue: linalg::min_hermitian_eigenvalue(&g.matrix_at(p)),
        })?;
        let top = ev[n - 1];
        if top > max {
            max = top;
            argmax = p;
        }
        if top < min_of_max {
            min_of_max = top;
            argmin_of_max = p;
        }
        eigenvalues.push(ev);
    }
    Ok(RicciSpectrum {
        eigenvalues,
        max,
        argmax,
        min_of_max,
        argmin_of_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchSample {
    /// `(1 + Kt) Rᵉ_{uū} Rᵉ_{vv̄} − |Rᵉ_{uv̄xx̄}|²`.
    pub ricci_margin: f64,
    /// `Rᵉ_{uūxx̄} Rᵉ_{vv̄xx̄} − |Rᵉ_{uv̄xx̄}|²`.
    pub cs_margin: f64,
    /// `|Rᵉ_{uv̄xx̄}|² / (Rᵉ_{uū} Rᵉ_{vv̄})`.
    pub ratio: f64,
}

pub fn pinch_sample(
    pc: &PointCurvature,
    ric: &DMatrix<Complex64>,
    factor: f64,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
    x: &DVector<Complex64>,
) -> PinchSample {
    let quad = |w: &DVector<Complex64>| linalg::quad_form(&ric.transpose(), w).re;
    let ruu = quad(u);
    let rvv = quad(v);
    let cross = pc.eval4(u, v, x, x).norm_sqr();
    let ruuxx = pc.eval4(u, u, x, x).re;
    let rvvxx = pc.eval4(v, v, x, x).re;
    PinchSample {
        ricci_margin: factor * ruu * rvv - cross,
        cs_margin: ruuxx * rvvxx - cross,
        ratio: cross / (ruu * rvv),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PinchPoint {
    pub min_ricci_margin: f64,
    pub min_cs_margin: f64,
    /// CS margin at `u = v = x` (the equality case), minimized over the witnesses tried.
    pub witness_cs_margin: f64,
    pub max_ratio: f64,
    pub samples: usize,
    /// Set when `Rᵉ_{ij̄}` is not strictly negative at the point.
    pub violated: Option<String>,
}

/// Pinching margins of `Rᵉ` at one point over `samples` random unit triples
/// plus every triple of Ricci eigenvector directions.
pub fn pinch_margin_point(
    pc_eps: &PointCurvature,
    k: f64,
    t: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<PinchPoint> {
    let n = pc_eps.n();
    let g = &pc_eps.g;
    let ric = pc_eps.ricci()?;
    let ev = ricci_eigenvalues(&ric, g)?;
    let violated = (ev[n - 1] >= 0.0).then(|| format!("Ricci of the shifted tensor is not negative (max eigenvalue {:e})", ev[n - 1]));
    let (_, vecs) = linalg::generalized_eigen(&linalg::hermitian_part(&ric.transpose()), &g.transpose())
        .ok_or(HcfError::SingularMetric { point: 0, min_eigenvalue: linalg::min_hermitian_eigenvalue(g) })?;
    let dirs: Vec<DVector<Complex64>> = (0..n).map(|c| normalize(&vecs.column(c).into_owned(), g)).collect();
    let factor = 1.0 + k * t;
    let mut out = PinchPoint {
        min_ricci_margin: f64::INFINITY,
        min_cs_margin: f64::INFINITY,
        witness_cs_margin: f64::INFINITY,
        max_ratio: 0.0,
        samples: 0,
        violated,
    };
    let record = |s: PinchSample, out: &mut PinchPoint| {
        out.min_ricci_margin = out.min_ricci_margin.min(s.ricci_margin);
        out.min_cs_margin = out.min_cs_margin.min(s.cs_margin);
        out.max_ratio = out.max_ratio.max(s.ratio);
        out.samples += 1;
    };
    for a in &dirs {
        let s = pinch_sample(pc_eps, &ric, factor, a, a, a);
        out.witness_cs_margin = out.witness_cs_margin.min(s.cs_margin.abs());
        for b in &dirs {
            for c in &dirs {
                record(pinch_sample(pc_eps, &ric, factor, a, b, c), &mut out);
            }
        }
    }
    for _ in 0..samples {
        let u = random_unit(rng, g);
        let v = random_unit(rng, g);
        let x = random_unit(rng, g);
        record(pinch_sample(pc_eps, &ric, factor, &u, &v, &x), &mut out);
        let s = pinch_sample(pc_eps, &ric, factor, &x, &x, &x);
        out.witness_cs_margin = out.witness_cs_margin.min(s.cs_margin.abs());
    }
    Ok(out)
}

/// Evenly strided subset of `count` grid points (all points when `count ≥ np`).
pub fn sample_points(np: usize, count: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    if count >= np {
        return (0..np).collect();
    }
    (0..count).map(|k| k * np / count).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GriffithsReport {
    pub points: Vec<usize>,
    pub values: Vec<f64>,
    pub max: f64,
    pub argmax: usize,
    #[serde(skip)]
    pub witness: Option<(DVector<Complex64>, DVector<Complex64>)>,
    pub restarts: usize,
    pub iterations: usize,
    pub converged: bool,
    pub kappa_bound: Option<f64>,
    /// Largest pointwise conjugation defect removed before the search.
    pub conjugation_defect: f64,
}

pub fn griffiths_report(
    rm_lowered: &TensorField,
    g: &MetricField,
    points: &[usize],
    settings: &GriffithsSettings,
    seed: u64,
) -> Result<GriffithsReport> {
    let mut report = GriffithsReport {
        points: points.to_vec(),
        values: Vec::with_capacity(points.len()),
        max: f64::NEG_INFINITY,
        argmax: 0,
        witness: None,
        restarts: settings.restarts,
        iterations: 0,
        converged: true,
        kappa_bound: None,
        conjugation_defect: 0.0,
    };
    for &p in points {
        let raw = PointCurvature::from_field(rm_lowered, g, p);
        report.conjugation_defect = report.conjugation_defect.max(raw.conjugation_defect());
        let pc = raw.conjugation_symmetrized();
        let mut rng = point_rng(seed, p, 1);
        let r = griffiths_extremum(&pc, settings, &mut rng)?;
        report.iterations += r.iterations;
        report.converged &= r.converged;
        if r.kappa > report.max {
            report.max = r.kappa;
            report.argmax = p;
            report.witness = Some((r.x.clone(), r.y.clone()));
        }
        report.values.push(r.kappa);
    }
    report.kappa_bound = kappa_bound(report.max);
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PinchReport {
    pub min_ricci_margin: f64,
    pub argmin: usize,
    pub min_cs_margin: f64,
    pub witness_cs_margin: f64,
    pub max_ratio: f64,
    pub samples: usize,
    pub violated: Vec<(usize, String)>,
}

pub fn pinch_margin(
    shift: &EpsilonShift,
    g: &MetricField,
    k: f64,
    t: f64,
    points: &[usize],
    samples: usize,
    seed: u64,
) -> Result<PinchReport> {
    let mut report = PinchReport {
        min_ricci_margin: f64::INFINITY,
        argmin: 0,
        min_cs_margin: f64::INFINITY,
        witness_cs_margin: 0.0,
        max_ratio: 0.0,
        samples: 0,
        violated: Vec::new(),
    };
    for &p in points {
        let pc = PointCurvature::from_field(&shift.r_eps, g, p).conjugation_symmetrized();
        let mut rng = point_rng(seed, p, 2);
        let r = pinch_margin_point(&pc, k, t, samples, &mut rng)?;
        if r.min_ricci_margin < report.min_ricci_margin {
            report.min_ricci_margin = r.min_ricci_margin;
            report.argmin = p;
        }
        report.min_cs_margin = report.min_cs_margin.min(r.min_cs_margin);
        report.witness_cs_margin = report.witness_cs_margin.max(r.witness_cs_margin);
        report.max_ratio = report.max_ratio.max(r.max_ratio);
        report.samples += r.samples;
        if let Some(reason) = r.violated {
            report.violated.push((p, reason));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionSettings {
    pub epsilon: f64,
    /// The `K` of the `(1 + Kt)` pinching factor.
    pub pinch_k: f64,
    pub griffiths_points: usize,
    pub pinch_points: usize,
    pub pinch_samples: usize,
    pub griffiths: GriffithsSettings,
    pub seed: u64,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            pinch_k: 1.0,
            griffiths_points: 64,
            pinch_points: 16,
            pinch_samples: 64,
            griffiths: GriffithsSettings::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub t: f64,
    pub griffiths: GriffithsReport,
    #[serde(skip)]
    pub ricci: RicciSpectrum,
    pub max_ricci_eigenvalue: f64,
    pub pinch: PinchReport,
}

/// Condition analysis of a curvature tensor field (the package's own, or an injected one).
pub fn analyze(
    rm_lowered: &TensorField,
    g: &MetricField,
    g_inverse: &TensorField,
    t: f64,
    settings: &ConditionSettings,
) -> Result<CurvatureReport> {
    let np = g.grid().num_points();
    let ric = crate::chern::first_ricci_trace(rm_lowered, g_inverse)?;
    let ricci = ricci_spectrum(&ric, g)?;
    let griffiths = griffiths_report(
        rm_lowered,
        g,
        &sample_points(np, settings.griffiths_points),
        &settings.griffiths,
        settings.seed,
    )?;
    let shift = eps_shift(rm_lowered, g, g_inverse, settings.epsilon)?;
    let pinch = pinch_margin(
        &shift,
        g,
        settings.pinch_k,
        t,
        &sample_points(np, settings.pinch_points),
        settings.pinch_samples,
        settings.seed,
    )?;
    Ok(CurvatureReport {
        t,
        max_ricci_eigenvalue: ricci.max,
        griffiths,
        ricci,
        pinch,
    })
}

pub fn analyze_package(pkg: &ChernPackage, t: f64, settings: &ConditionSettings) -> Result<CurvatureReport> {
    analyze(&pkg.rm_lowered, &pkg.metric, &pkg.g_inverse, t, settings)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConditionSummary {
    pub griffiths_nonpositive: bool,
    pub griffiths_max: f64,
    pub griffiths_witness_point: usize,
    pub ricci_nonpositive: bool,
    pub ricci_max: f64,
    pub ricci_witness_point: usize,
    pub ricci_quasi_negative: bool,
    pub ricci_min_of_max: f64,
    pub ricci_negative_point: usize,
}

pub fn classify(report: &CurvatureReport) -> ConditionSummary {
    let ricci_nonpositive = report.ricci.max <= NONPOSITIVE_TOL;
    ConditionSummary {
        griffiths_nonpositive: report.griffiths.max <= NONPOSITIVE_TOL,
        griffiths_max: report.griffiths.max,
        griffiths_witness_point: report.griffiths.argmax,
        ricci_nonpositive,
        ricci_max: report.ricci.max,
        ricci_witness_point: report.ricci.argmax,
        ricci_quasi_negative: ricci_nonpositive && report.ricci.min_of_max < -NONPOSITIVE_TOL,
        ricci_min_of_max: report.ricci.min_of_max,
        ricci_negative_point: report.ricci.argmin_of_max,
    }
}

/// `R = −B[g]` as a grid field (the synthetic injection used by the condition checks).
pub fn minus_b_field(g: &MetricField) -> TensorField {
    b_tensor(g).scale(Complex64::new(-1.0, 0.0))
}
