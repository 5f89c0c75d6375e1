//! Chern connection and curvature of a Hermitian metric field.
//!
//! Index conventions (slot order of the stored fields):
//! - `g_inverse`: `g^{kl̄}` at `(k, l)`, the inverse with `g^{kl̄} g_{jl̄} = δ^k_j`;
//! - `gamma`: `Γ^k_{ij} = g^{kl̄} ∂_i g_{jl̄}` at `(i, j, k)`;
//! - `torsion`: `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}` at `(i, j, k)`;
//! - `torsion_lowered`: `T_{ijk̄} = g_{pk̄} T^p_{ij}` at `(i, j, k)`;
//! - `rm_mixed`: `R_{ij̄k}{}^l = −∂_j̄ Γ^l_{ik}` at `(i, j, k, l)`;
//! - `rm_lowered`: `R_{ij̄kl̄} = g_{pl̄} R_{ij̄k}{}^p` at `(i, j, k, l)`;
//! - `ric_first`: `R_{ij̄} = g^{kl̄} R_{ij̄kl̄}`; `ric_second`: `S_{ij̄} = g^{kl̄} R_{kl̄ij̄}`.
//!
//! Covariant derivatives append the derivative index as the last slot.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{HcfError, Result};
use crate::grid::TorusGrid;
use crate::linalg;
use crate::tensor::{comp_index, comp_multi_index, Holomorphy, MetricField, Slot, TensorField, Variance};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub const INVERSE_SIGNATURE: [Slot; 2] = [Slot::UPPER_HOLO, Slot::UPPER_ANTI];
pub const GAMMA_SIGNATURE: [Slot; 3] = [Slot::LOWER_HOLO, Slot::LOWER_HOLO, Slot::UPPER_HOLO];
pub const TORSION_LOWERED_SIGNATURE: [Slot; 3] = [Slot::LOWER_HOLO, Slot::LOWER_HOLO, Slot::LOWER_ANTI];
pub const RM_MIXED_SIGNATURE: [Slot; 4] = [Slot::LOWER_HOLO, Slot::LOWER_ANTI, Slot::LOWER_HOLO, Slot::UPPER_HOLO];
pub const RM_SIGNATURE: [Slot; 4] = [Slot::LOWER_HOLO, Slot::LOWER_ANTI, Slot::LOWER_HOLO, Slot::LOWER_ANTI];
pub const HERMITIAN_FORM_SIGNATURE: [Slot; 2] = [Slot::LOWER_HOLO, Slot::LOWER_ANTI];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Holo,
    Anti,
}

impl Direction {
    fn slot(self) -> Slot {
        match self {
            Direction::Holo => Slot::LOWER_HOLO,
            Direction::Anti => Slot::LOWER_ANTI,
        }
    }
}

/// `out += a · b` pointwise.
pub(crate) fn add_product(out: &mut [Complex64], a: &[Complex64], b: &[Complex64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o += x * y;
    }
}

/// `out += s · a · b` pointwise.
pub(crate) fn add_scaled_product(out: &mut [Complex64], s: f64, a: &[Complex64], b: &[Complex64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o += x * y * s;
    }
}

/// `g^{kl̄}` pointwise. Fails on the first point where `g` is not positive definite.
pub fn inverse_metric(g: &MetricField) -> Result<TensorField> {
    let n = g.n();
    let grid = g.grid();
    let np = grid.num_points();
    let mut inv = TensorField::zeros(grid, &INVERSE_SIGNATURE);
    for p in 0..np {
        let m = g.matrix_at(p);
        let minv = linalg::inverse(&m).ok_or_else(|| HcfError::SingularMetric {
            point: p,
            min_eigenvalue: linalg::min_hermitian_eigenvalue(&m),
        })?;
        // g^{kl̄} = (G⁻¹)[l][k] with G[j][l] = g_{jl̄}
        for k in 0..n {
            for l in 0..n {
                inv.data_mut()[comp_index(n, &[k, l]) * np + p] = minv[(l, k)];
            }
        }
    }
    Ok(inv)
}

fn christoffel_with(g: &MetricField, g_inverse: &TensorField) -> Result<TensorField> {
    let n = g.n();
    let grid = g.grid();
    let mut gamma = TensorField::zeros(grid, &GAMMA_SIGNATURE);
    for i in 0..n {
        let dg = g.field().partial_holo(i)?;
        for j in 0..n {
            for k in 0..n {
                let c = comp_index(n, &[i, j, k]);
                let out = gamma.comp_mut(c);
                for l in 0..n {
                    add_product(out, g_inverse.comp_at(&[k, l]), dg.comp_at(&[j, l]));
                }
            }
        }
    }
    Ok(gamma)
}

/// `Γ^k_{ij} = g^{kl̄} ∂_i g_{jl̄}`.
pub fn christoffel(g: &MetricField) -> Result<TensorField> {
    let inv = inverse_metric(g)?;
    christoffel_with(g, &inv)
}

/// `(T^k_{ij}, T_{ijk̄})`.
pub fn torsion(gamma: &TensorField, g: &MetricField) -> Result<(TensorField, TensorField)> {
    gamma.check_signature(&GAMMA_SIGNATURE)?;
    gamma.check_grid(g.field())?;
    let n = g.n();
    let grid = gamma.grid();
    let np = grid.num_points();
    let mut t = TensorField::zeros(grid, &GAMMA_SIGNATURE);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = gamma.comp_at(&[i, j, k]);
                let b = gamma.comp_at(&[j, i, k]);
                let c = comp_index(n, &[i, j, k]);
                let out = &mut t.data_mut()[c * np..(c + 1) * np];
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o = x - y;
                }
            }
        }
    }
    let mut lowered = TensorField::zeros(grid, &TORSION_LOWERED_SIGNATURE);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = comp_index(n, &[i, j, k]);
                let out = lowered.comp_mut(c);
                for p in 0..n {
                    add_product(out, g.field().comp_at(&[p, k]), t.comp_at(&[i, j, p]));
                }
            }
        }
    }
    Ok((t, lowered))
}

fn curvature_from_gamma(gamma: &TensorField, g: &MetricField) -> Result<(TensorField, TensorField)> {
    let n = g.n();
    let grid = gamma.grid();
    let np = grid.num_points();
    let mut mixed = TensorField::zeros(grid, &RM_MIXED_SIGNATURE);
    for j in 0..n {
        let d = gamma.partial_anti(j)?;
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let c = comp_index(n, &[i, j, k, l]);
                    let src = d.comp_at(&[i, k, l]);
                    let out = &mut mixed.data_mut()[c * np..(c + 1) * np];
                    for (o, v) in out.iter_mut().zip(src) {
                        *o = -v;
                    }
                }
            }
        }
    }
    let lowered = lower_last_holo(&mixed, g)?;
    Ok((mixed, lowered))
}

/// Lowers a trailing upper-holomorphic slot with `g`: `A_{…l̄} = g_{pl̄} A_{…}{}^p`.
fn lower_last_holo(t: &TensorField, g: &MetricField) -> Result<TensorField> {
    let sig = t.signature();
    if sig.last() != Some(&Slot::UPPER_HOLO) {
        return Err(HcfError::SignatureMismatch("expected trailing upper holomorphic slot".into()));
    }
    let n = t.n();
    let r = t.rank();
    let mut new_sig = sig.to_vec();
    *new_sig.last_mut().unwrap() = Slot::LOWER_ANTI;
    let mut out = TensorField::zeros(t.grid(), &new_sig);
    for c in 0..out.num_components() {
        let idx = comp_multi_index(n, r, c);
        let l = idx[r - 1];
        let mut src = idx.clone();
        let dst = out.comp_mut(c);
        for p in 0..n {
            src[r - 1] = p;
            add_product(dst, g.field().comp_at(&[p, l]), t.comp_at(&src));
        }
    }
    Ok(out)
}

/// `(R_{ij̄k}{}^l, R_{ij̄kl̄})` with `R_{ij̄k}{}^l = −∂_j̄ Γ^l_{ik}`.
pub fn curvature(g: &MetricField) -> Result<(TensorField, TensorField)> {
    let gamma = christoffel(g)?;
    curvature_from_gamma(&gamma, g)
}

/// `R_{ij̄} = g^{kl̄} R_{ij̄kl̄}`.
pub fn first_ricci_trace(rm_lowered: &TensorField, g_inverse: &TensorField) -> Result<TensorField> {
    trace_pair(rm_lowered, g_inverse, false)
}

/// `S_{ij̄} = g^{kl̄} R_{kl̄ij̄}`.
pub fn second_ricci(rm_lowered: &TensorField, g_inverse: &TensorField) -> Result<TensorField> {
    trace_pair(rm_lowered, g_inverse, true)
}

fn trace_pair(rm: &TensorField, g_inverse: &TensorField, first_pair: bool) -> Result<TensorField> {
    rm.check_signature(&RM_SIGNATURE)?;
    g_inverse.check_signature(&INVERSE_SIGNATURE)?;
    rm.check_grid(g_inverse)?;
    let n = rm.n();
    let mut out = TensorField::zeros(rm.grid(), &HERMITIAN_FORM_SIGNATURE);
    for i in 0..n {
        for j in 0..n {
            let c = comp_index(n, &[i, j]);
            let dst = out.comp_mut(c);
            for k in 0..n {
                for l in 0..n {
                    let src = if first_pair {
                        rm.comp_at(&[k, l, i, j])
                    } else {
                        rm.comp_at(&[i, j, k, l])
                    };
                    add_product(dst, g_inverse.comp_at(&[k, l]), src);
                }
            }
        }
    }
    Ok(out)
}

/// Scalar field `ln det g` (Cholesky per point).
pub fn log_det_field(g: &MetricField) -> Result<Vec<Complex64>> {
    let np = g.grid().num_points();
    (0..np)
        .map(|p| {
            let m = g.matrix_at(p);
            linalg::log_det(&m)
                .map(|v| Complex64::new(v, 0.0))
                .ok_or_else(|| HcfError::NonPositiveDeterminant {
                    point: p,
                    det: m.determinant().re,
                })
        })
        .collect()
}

/// `R_{ij̄} = −∂_i ∂_j̄ log det g`; never touches the connection.
pub fn first_ricci_logdet(g: &MetricField) -> Result<TensorField> {
    let n = g.n();
    let grid = g.grid();
    let ld = TensorField::scalar(grid, log_det_field(g)?)?;
    let mut out = TensorField::zeros(grid, &HERMITIAN_FORM_SIGNATURE);
    for j in 0..n {
        let dj = ld.partial_anti(j)?;
        for i in 0..n {
            let dij = dj.partial_holo(i)?;
            let c = comp_index(n, &[i, j]);
            for (o, v) in out.comp_mut(c).iter_mut().zip(dij.data()) {
                *o = -v;
            }
        }
    }
    Ok(out)
}

/// `S_{ij̄}` straight from the metric without storing the full curvature
/// tensor; this is the flow velocity.
pub fn second_ricci_from_metric(g: &MetricField) -> Result<TensorField> {
    let n = g.n();
    let grid = g.grid();
    let np = grid.num_points();
    let ginv = inverse_metric(g)?;
    let gamma = christoffel_with(g, &ginv)?;
    let mut s = TensorField::zeros(grid, &HERMITIAN_FORM_SIGNATURE);
    let mut d = vec![ZERO; np];
    let mut coef = vec![ZERO; np];
    // S_{ij̄} = −g^{kl̄} g_{pj̄} ∂_l̄ Γ^p_{ki}
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for p in 0..n {
                    grid.d_anti(gamma.comp_at(&[k, i, p]), l, &mut d);
                    for j in 0..n {
                        let gi = ginv.comp_at(&[k, l]);
                        let gm = g.field().comp_at(&[p, j]);
                        for q in 0..np {
                            coef[q] = -gi[q] * gm[q];
                        }
                        add_product(s.comp_mut(comp_index(n, &[i, j])), &coef, &d);
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Everything derived from one metric; immutable once assembled.
#[derive(Debug, Clone)]
pub struct ChernPackage {
    pub metric: MetricField,
    pub g_inverse: TensorField,
    pub gamma: TensorField,
    pub torsion: TensorField,
    pub torsion_lowered: TensorField,
    pub rm_mixed: TensorField,
    pub rm_lowered: TensorField,
    pub ric_first: TensorField,
    pub ric_second: TensorField,
}

impl ChernPackage {
    pub fn compute(metric: &MetricField) -> Result<Self> {
        let g_inverse = inverse_metric(metric)?;
        let gamma = christoffel_with(metric, &g_inverse)?;
        let (torsion, torsion_lowered) = torsion(&gamma, metric)?;
        let (rm_mixed, rm_lowered) = curvature_from_gamma(&gamma, metric)?;
        let ric_first = first_ricci_trace(&rm_lowered, &g_inverse)?;
        let ric_second = second_ricci(&rm_lowered, &g_inverse)?;
        Ok(Self {
            metric: metric.clone(),
            g_inverse,
            gamma,
            torsion,
            torsion_lowered,
            rm_mixed,
            rm_lowered,
            ric_first,
            ric_second,
        })
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.metric.grid()
    }

    pub fn n(&self) -> usize {
        self.metric.n()
    }

    /// `T_{j̄l̄k} = conj(T_{jlk̄})`, slots `(anti, anti, holo)`.
    pub fn torsion_lowered_conj(&self) -> TensorField {
        self.torsion_lowered.conj()
    }

    pub fn covariant_derivative(&self, t: &TensorField, dir: Direction) -> Result<TensorField> {
        covariant_derivative(t, self, dir)
    }
}

/// `∇_a t` (or `∇_ā t`) with the same signature as `t`.
///
/// Holomorphic directions correct holomorphic slots with `Γ`; antiholomorphic
/// directions correct antiholomorphic slots with `conj(Γ)`. The Chern
/// connection has no mixed coefficients.
pub fn covariant_derivative_along(
    t: &TensorField,
    pkg: &ChernPackage,
    dir: Direction,
    a: usize,
) -> Result<TensorField> {
    t.check_grid(&pkg.gamma)?;
    let mut out = match dir {
        Direction::Holo => t.partial_holo(a)?,
        Direction::Anti => t.partial_anti(a)?,
    };
    let n = t.n();
    let r = t.rank();
    let np = t.num_points();
    let gamma = &pkg.gamma;
    let want = match dir {
        Direction::Holo => Holomorphy::Holo,
        Direction::Anti => Holomorphy::Anti,
    };
    let mut coef = vec![ZERO; np];
    for c in 0..t.num_components() {
        let idx = comp_multi_index(n, r, c);
        for (s, slot) in t.signature().iter().enumerate() {
            if slot.holomorphy != want {
                continue;
            }
            let m = idx[s];
            let mut src = idx.clone();
            for q in 0..n {
                src[s] = q;
                let (g_idx, sign) = match slot.variance {
                    // +Γ^m_{aq} t^{..q..}
                    Variance::Upper => ([a, q, m], 1.0),
                    // −Γ^q_{am} t_{..q..}
                    Variance::Lower => ([a, m, q], -1.0),
                };
                let gc = gamma.comp_at(&g_idx);
                match dir {
                    Direction::Holo => coef.iter_mut().zip(gc).for_each(|(o, v)| *o = v * sign),
                    Direction::Anti => coef.iter_mut().zip(gc).for_each(|(o, v)| *o = v.conj() * sign),
                }
                let from = comp_index(n, &src);
                let tsrc = t.comp(from);
                add_product(&mut out.data_mut()[c * np..(c + 1) * np], &coef, tsrc);
            }
        }
    }
    Ok(out)
}

/// Full covariant derivative in one holomorphy class; the new lower slot is appended.
pub fn covariant_derivative(t: &TensorField, pkg: &ChernPackage, dir: Direction) -> Result<TensorField> {
    let n = t.n();
    let np = t.num_points();
    let mut sig = t.signature().to_vec();
    sig.push(dir.slot());
    let mut out = TensorField::zeros(t.grid(), &sig);
    for a in 0..n {
        let d = covariant_derivative_along(t, pkg, dir, a)?;
        for c in 0..t.num_components() {
            let dst = c * n + a;
            out.data_mut()[dst * np..(dst + 1) * np].copy_from_slice(d.comp(c));
        }
    }
    Ok(out)
}

/// Which second-order operator to use for the tensor Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianConvention {
    /// `½ g^{rs̄} (∇_r∇_s̄ + ∇_s̄∇_r)`.
    Symmetrized,
    /// `g^{rs̄} ∇_r∇_s̄`.
    HoloFirst,
}

/// Tensor Laplacian. `∇_r∇_s̄ t` denotes `∇_r` applied to `∇_s̄ t`.
pub fn laplacian(t: &TensorField, pkg: &ChernPackage, convention: LaplacianConvention) -> Result<TensorField> {
    let n = t.n();
    let mut acc = TensorField::zeros(t.grid(), t.signature());
    let w = match convention {
        LaplacianConvention::Symmetrized => 0.5,
        LaplacianConvention::HoloFirst => 1.0,
    };
    // ∇_r ∇_s̄ t
    for s in 0..n {
        let vs = covariant_derivative_along(t, pkg, Direction::Anti, s)?;
        for r in 0..n {
            let rs = covariant_derivative_along(&vs, pkg, Direction::Holo, r)?;
            let gi = pkg.g_inverse.comp_at(&[r, s]);
            for c in 0..t.num_components() {
                add_scaled_product(acc.comp_mut(c), w, gi, rs.comp(c));
            }
        }
    }
    if convention == LaplacianConvention::Symmetrized {
        // ∇_s̄ ∇_r t
        for r in 0..n {
            let ur = covariant_derivative_along(t, pkg, Direction::Holo, r)?;
            for s in 0..n {
                let sr = covariant_derivative_along(&ur, pkg, Direction::Anti, s)?;
                let gi = pkg.g_inverse.comp_at(&[r, s]);
                for c in 0..t.num_components() {
                    add_scaled_product(acc.comp_mut(c), w, gi, sr.comp(c));
                }
            }
        }
    }
    Ok(acc)
}

/// `(g^{rs̄}∇_r∇_s̄ t, g^{rs̄}∇_s̄∇_r t)`; the symmetrized Laplacian is their mean.
pub fn laplacian_halves(t: &TensorField, pkg: &ChernPackage) -> Result<(TensorField, TensorField)> {
    let n = t.n();
    let mut holo = TensorField::zeros(t.grid(), t.signature());
    let mut anti = TensorField::zeros(t.grid(), t.signature());
    for s in 0..n {
        let vs = covariant_derivative_along(t, pkg, Direction::Anti, s)?;
        for r in 0..n {
            let rs = covariant_derivative_along(&vs, pkg, Direction::Holo, r)?;
            let gi = pkg.g_inverse.comp_at(&[r, s]);
            for c in 0..t.num_components() {
                add_scaled_product(holo.comp_mut(c), 1.0, gi, rs.comp(c));
            }
        }
    }
    for r in 0..n {
        let ur = covariant_derivative_along(t, pkg, Direction::Holo, r)?;
        for s in 0..n {
            let sr = covariant_derivative_along(&ur, pkg, Direction::Anti, s)?;
            let gi = pkg.g_inverse.comp_at(&[r, s]);
            for c in 0..t.num_components() {
                add_scaled_product(anti.comp_mut(c), 1.0, gi, sr.comp(c));
            }
        }
    }
    Ok((holo, anti))
}

/// Function Laplacian `g^{rs̄} ∂_r ∂_s̄ f` on a scalar grid field.
pub fn scalar_laplacian(f: &[Complex64], g_inverse: &TensorField) -> Result<Vec<Complex64>> {
    let grid = g_inverse.grid();
    let n = grid.n();
    let np = grid.num_points();
    let mut out = vec![ZERO; np];
    let mut ds = vec![ZERO; np];
    let mut drs = vec![ZERO; np];
    for s in 0..n {
        grid.d_anti(f, s, &mut ds);
        for r in 0..n {
            grid.d_holo(&ds, r, &mut drs);
            add_product(&mut out, g_inverse.comp_at(&[r, s]), &drs);
        }
    }
    Ok(out)
}

/// Pointwise `|A|²` with every slot contracted by `g` or `g⁻¹` as its type dictates.
pub fn pointwise_norm_sq(t: &TensorField, g: &MetricField, g_inverse: &TensorField) -> Result<Vec<f64>> {
    t.check_grid(g.field())?;
    let n = t.n();
    let r = t.rank();
    let np = t.num_points();
    let ncomp = t.num_components();
    let mut out = vec![0.0; np];
    let mut a = vec![ZERO; ncomp];
    let mut cur = vec![ZERO; ncomp];
    let mut next = vec![ZERO; ncomp];
    let idxs: Vec<Vec<usize>> = (0..ncomp).map(|c| comp_multi_index(n, r, c)).collect();
    let strides: Vec<usize> = (0..r).map(|s| n.pow((r - 1 - s) as u32)).collect();
    for p in 0..np {
        for c in 0..ncomp {
            a[c] = t.data()[c * np + p];
        }
        cur.copy_from_slice(&a);
        for (s, slot) in t.signature().iter().enumerate() {
            let m = |x: usize, y: usize| match slot.variance {
                Variance::Lower => g_inverse.data()[comp_index(n, &[x, y]) * np + p],
                Variance::Upper => g.field().data()[comp_index(n, &[x, y]) * np + p],
            };
            for c in 0..ncomp {
                let i = idxs[c][s];
                let base = c - i * strides[s];
                let mut v = ZERO;
                for q in 0..n {
                    let coef = match slot.holomorphy {
                        Holomorphy::Holo => m(q, i),
                        Holomorphy::Anti => m(i, q),
                    };
                    v += coef * cur[base + q * strides[s]];
                }
                next[c] = v;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out[p] = a.iter().zip(&cur).map(|(x, y)| (x * y.conj()).re).sum::<f64>().max(0.0);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct NormReport {
    /// Pointwise `|Rm|`.
    pub rm: Vec<f64>,
    /// Pointwise `|T|²`.
    pub torsion_sq: Vec<f64>,
    /// Pointwise `|∇T|` (both holomorphy classes of the derivative).
    pub grad_torsion: Vec<f64>,
    /// Pointwise `F = |Rm|² + |T|⁴ + |∇T|²`.
    pub f: Vec<f64>,
    pub sup_rm: f64,
    pub sup_torsion_sq: f64,
    pub sup_grad_torsion: f64,
    pub sup_f: f64,
    /// `sup (|Rm| + |T|² + |∇T|)`.
    pub k_now: f64,
}

pub fn tensor_norms(pkg: &ChernPackage) -> Result<NormReport> {
    let g = &pkg.metric;
    let ginv = &pkg.g_inverse;
    let rm_sq = pointwise_norm_sq(&pkg.rm_lowered, g, ginv)?;
    let torsion_sq = pointwise_norm_sq(&pkg.torsion, g, ginv)?;
    let dt_h = covariant_derivative(&pkg.torsion, pkg, Direction::Holo)?;
    let mut grad_sq = pointwise_norm_sq(&dt_h, g, ginv)?;
    drop(dt_h);
    let dt_a = covariant_derivative(&pkg.torsion, pkg, Direction::Anti)?;
    for (o, v) in grad_sq.iter_mut().zip(pointwise_norm_sq(&dt_a, g, ginv)?) {
        *o += v;
    }
    let rm: Vec<f64> = rm_sq.iter().map(|v| v.sqrt()).collect();
    let grad_torsion: Vec<f64> = grad_sq.iter().map(|v| v.sqrt()).collect();
    let f: Vec<f64> = (0..rm.len())
        .map(|p| rm_sq[p] + torsion_sq[p] * torsion_sq[p] + grad_sq[p])
        .collect();
    let sup = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let k_now = (0..rm.len())
        .map(|p| rm[p] + torsion_sq[p] + grad_torsion[p])
        .fold(0.0, f64::max);
    Ok(NormReport {
        sup_rm: sup(&rm),
        sup_torsion_sq: sup(&torsion_sq),
        sup_grad_torsion: sup(&grad_torsion),
        sup_f: sup(&f),
        k_now,
        rm,
        torsion_sq,
        grad_torsion,
        f,
    })
}
