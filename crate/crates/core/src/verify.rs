//! Verification suites: right-hand sides of the curvature and Ricci evolution
//! equations under `∂_t g = −S`, finite-difference time derivatives along a
//! computed flow, and pointwise identities of the Chern connection.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chern::{
    covariant_derivative, covariant_derivative_along, first_ricci_logdet, first_ricci_trace, laplacian_halves, ChernPackage,
    Direction, LaplacianConvention, HERMITIAN_FORM_SIGNATURE, RM_SIGNATURE,
};
use crate::conditions::{b_tensor, b_trace_residual};
use crate::error::{HcfError, Result};
use crate::flow::{step_hcf, FlowState, Trajectory};
use crate::presets::seeded_real_mix;
use crate::tensor::{comp_index, comp_multi_index, MetricField, Slot, TensorField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn mul_add(out: &mut [Complex64], s: Complex64, a: &[Complex64], b: &[Complex64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o += s * x * y;
    }
}

fn mul3_add(out: &mut [Complex64], s: f64, a: &[Complex64], b: &[Complex64], c: &[Complex64]) {
    for (((o, x), y), z) in out.iter_mut().zip(a).zip(b).zip(c) {
        *o += x * y * z * s;
    }
}

fn conj_of(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().map(|x| x.conj()).collect()
}

/// `S_i{}^p = g^{pq̄} S_{iq̄}` at `(i, p)` and `S^{q̄}{}_{j̄} = g^{pq̄} S_{pj̄}` at `(j, q)`.
fn raised_second_ricci(pkg: &ChernPackage) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let n = pkg.n();
    let np = pkg.grid().num_points();
    let s = &pkg.ric_second;
    let gi = &pkg.g_inverse;
    let mut holo = vec![vec![ZERO; np]; n * n];
    let mut anti = vec![vec![ZERO; np]; n * n];
    for a in 0..n {
        for b in 0..n {
            for q in 0..n {
                mul_add(&mut holo[a * n + b], Complex64::new(1.0, 0.0), gi.comp_at(&[b, q]), s.comp_at(&[a, q]));
                mul_add(&mut anti[a * n + b], Complex64::new(1.0, 0.0), gi.comp_at(&[q, b]), s.comp_at(&[q, a]));
            }
        }
    }
    (holo, anti)
}

/// The individual terms of the right-hand side of `∂_t R_{ij̄kl̄}`, each at
/// `(i, j, k, l)`; every term already carries its sign and prefactor.
#[derive(Debug, Clone)]
pub struct RmEvolutionTerms {
    /// `ΔR` with the symmetrized Laplacian `½ g^{rs̄}(∇_r∇_s̄ + ∇_s̄∇_r)`.
    pub laplacian: TensorField,
    /// `g^{rs̄} ∇_r ∇_s̄ R`, the alternate Laplacian.
    pub laplacian_holo_first: TensorField,
    /// `g^{rs̄} T^p_{ri} ∇_s̄ R_{pj̄kl̄}`.
    pub torsion_anti_gradient: TensorField,
    /// `g^{rs̄} T^{q̄}_{s̄j̄} ∇_r R_{iq̄kl̄}`.
    pub torsion_holo_gradient: TensorField,
    /// `g^{rs̄} T^p_{ri} T^{q̄}_{s̄j̄} R_{pq̄kl̄}`.
    pub torsion_torsion: TensorField,
    /// `g^{rs̄} R_{ij̄r}{}^p R_{ps̄kl̄}`.
    pub quadratic_first: TensorField,
    /// `g^{rs̄} R_{rj̄k}{}^p R_{is̄pl̄}`.
    pub quadratic_second: TensorField,
    /// `−g^{rs̄} R_{rj̄pl̄} R_{is̄k}{}^p`.
    pub quadratic_third: TensorField,
    /// `−½[S_i^p R_{pj̄kl̄} + S_k^p R_{ij̄pl̄} + S^{q̄}_{j̄} R_{iq̄kl̄} + S^{q̄}_{l̄} R_{ij̄kq̄}]`.
    pub second_ricci_terms: TensorField,
}

impl RmEvolutionTerms {
    pub fn named(&self) -> [(&'static str, &TensorField); 8] {
        [
            ("laplacian", &self.laplacian),
            ("torsion_anti_gradient", &self.torsion_anti_gradient),
            ("torsion_holo_gradient", &self.torsion_holo_gradient),
            ("torsion_torsion", &self.torsion_torsion),
            ("quadratic_first", &self.quadratic_first),
            ("quadratic_second", &self.quadratic_second),
            ("quadratic_third", &self.quadratic_third),
            ("second_ricci_terms", &self.second_ricci_terms),
        ]
    }

    /// The torsion-bearing terms.
    pub fn torsion_terms(&self) -> [&TensorField; 3] {
        [&self.torsion_anti_gradient, &self.torsion_holo_gradient, &self.torsion_torsion]
    }

    pub fn total(&self, convention: LaplacianConvention) -> Result<TensorField> {
        let mut out = match convention {
            LaplacianConvention::Symmetrized => self.laplacian.clone(),
            LaplacianConvention::HoloFirst => self.laplacian_holo_first.clone(),
        };
        for (_, t) in &self.named()[1..] {
            out.add_assign(t)?;
        }
        Ok(out)
    }
}

type TermSink<'a> = dyn FnMut(&'static str, TensorField) -> Result<()> + 'a;

/// Right-hand side terms of the curvature evolution under `∂_t g = −S`.
pub fn rm_evolution_terms(pkg: &ChernPackage) -> Result<RmEvolutionTerms> {
    let mut terms = std::collections::HashMap::new();
    rm_terms_streamed(pkg, &mut |name, t| {
        terms.insert(name, t);
        Ok(())
    })?;
    let mut take = |name: &str| terms.remove(name).expect("every term is produced");
    Ok(RmEvolutionTerms {
        laplacian: take("laplacian"),
        laplacian_holo_first: take("laplacian_holo_first"),
        torsion_anti_gradient: take("torsion_anti_gradient"),
        torsion_holo_gradient: take("torsion_holo_gradient"),
        torsion_torsion: take("torsion_torsion"),
        quadratic_first: take("quadratic_first"),
        quadratic_second: take("quadratic_second"),
        quadratic_third: take("quadratic_third"),
        second_ricci_terms: take("second_ricci_terms"),
    })
}

fn symmetrized_from_halves(holo: &TensorField, mut anti: TensorField) -> Result<TensorField> {
    anti.add_assign(holo)?;
    anti.data_mut().iter_mut().for_each(|v| *v *= 0.5);
    Ok(anti)
}

/// Produces the curvature terms one at a time so callers can reduce them
/// without holding all of them.
fn rm_terms_streamed(pkg: &ChernPackage, sink: &mut TermSink) -> Result<()> {
    let n = pkg.n();
    let grid = pkg.grid();
    let np = grid.num_points();
    let rm = &pkg.rm_lowered;
    let mix = &pkg.rm_mixed;
    let tor = &pkg.torsion;
    let gi = &pkg.g_inverse;
    let one = Complex64::new(1.0, 0.0);
    let zeros = || TensorField::zeros(grid, &RM_SIGNATURE);

    let (holo, anti) = laplacian_halves(rm, pkg)?;
    let sym = symmetrized_from_halves(&holo, anti)?;
    sink("laplacian", sym)?;
    sink("laplacian_holo_first", holo)?;

    let mut t_anti = zeros();
    let mut t_holo = zeros();
    let mut coef = vec![ZERO; np];
    for s in 0..n {
        let d = covariant_derivative_along(rm, pkg, Direction::Anti, s)?;
        for r in 0..n {
            for i in 0..n {
                for p in 0..n {
                    coef.iter_mut()
                        .zip(gi.comp_at(&[r, s]))
                        .zip(tor.comp_at(&[r, i, p]))
                        .for_each(|((c, g), t)| *c = g * t);
                    for j in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                mul_add(
                                    t_anti.comp_mut(comp_index(n, &[i, j, k, l])),
                                    one,
                                    &coef,
                                    d.comp_at(&[p, j, k, l]),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    sink("torsion_anti_gradient", t_anti)?;
    for r in 0..n {
        let d = covariant_derivative_along(rm, pkg, Direction::Holo, r)?;
        for s in 0..n {
            for j in 0..n {
                for q in 0..n {
                    coef.iter_mut()
                        .zip(gi.comp_at(&[r, s]))
                        .zip(tor.comp_at(&[s, j, q]))
                        .for_each(|((c, g), t)| *c = g * t.conj());
                    for i in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                mul_add(
                                    t_holo.comp_mut(comp_index(n, &[i, j, k, l])),
                                    one,
                                    &coef,
                                    d.comp_at(&[i, q, k, l]),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    sink("torsion_holo_gradient", t_holo)?;

    // h^{pq̄}_{ij̄} = g^{rs̄} T^p_{ri} conj(T^q_{sj})
    let mut tt = zeros();
    for i in 0..n {
        for j in 0..n {
            for p in 0..n {
                for q in 0..n {
                    coef.fill(ZERO);
                    for r in 0..n {
                        for s in 0..n {
                            let ts = conj_of(tor.comp_at(&[s, j, q]));
                            mul3_add(&mut coef, 1.0, gi.comp_at(&[r, s]), tor.comp_at(&[r, i, p]), &ts);
                        }
                    }
                    for k in 0..n {
                        for l in 0..n {
                            mul_add(tt.comp_mut(comp_index(n, &[i, j, k, l])), one, &coef, rm.comp_at(&[p, q, k, l]));
                        }
                    }
                }
            }
        }
    }

    sink("torsion_torsion", tt)?;

    for which in 0..3 {
        let mut q = zeros();
        for r in 0..n {
            for s in 0..n {
                let g_rs = gi.comp_at(&[r, s]);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                let out = q.comp_mut(comp_index(n, &[i, j, k, l]));
                                for p in 0..n {
                                    match which {
                                        0 => mul3_add(out, 1.0, g_rs, mix.comp_at(&[i, j, r, p]), rm.comp_at(&[p, s, k, l])),
                                        1 => mul3_add(out, 1.0, g_rs, mix.comp_at(&[r, j, k, p]), rm.comp_at(&[i, s, p, l])),
                                        _ => mul3_add(out, -1.0, g_rs, rm.comp_at(&[r, j, p, l]), mix.comp_at(&[i, s, k, p])),
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        sink(["quadratic_first", "quadratic_second", "quadratic_third"][which], q)?;
    }

    let (s_holo, s_anti) = raised_second_ricci(pkg);
    let half = Complex64::new(-0.5, 0.0);
    let mut sq = zeros();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let out = sq.comp_mut(comp_index(n, &[i, j, k, l]));
                    for p in 0..n {
                        mul_add(out, half, &s_holo[i * n + p], rm.comp_at(&[p, j, k, l]));
                        mul_add(out, half, &s_holo[k * n + p], rm.comp_at(&[i, j, p, l]));
                        mul_add(out, half, &s_anti[j * n + p], rm.comp_at(&[i, p, k, l]));
                        mul_add(out, half, &s_anti[l * n + p], rm.comp_at(&[i, j, k, p]));
                    }
                }
            }
        }
    }

    sink("second_ricci_terms", sq)
}

/// Assembled right-hand side in both Laplacian conventions.
#[derive(Debug, Clone)]
pub struct RhsTotals {
    pub symmetrized: TensorField,
    pub holo_first: TensorField,
    /// Largest torsion-bearing term.
    pub torsion_terms_sup: f64,
}

/// Curvature right-hand side summed term by term, holding at most a few
/// rank-4 fields at once.
pub fn rm_evolution_totals(pkg: &ChernPackage) -> Result<RhsTotals> {
    let mut sym = TensorField::zeros(pkg.grid(), &RM_SIGNATURE);
    let mut alt = TensorField::zeros(pkg.grid(), &RM_SIGNATURE);
    let mut torsion_terms_sup: f64 = 0.0;
    rm_terms_streamed(pkg, &mut |name, t| {
        match name {
            "laplacian" => sym.add_assign(&t)?,
            "laplacian_holo_first" => alt.add_assign(&t)?,
            _ => {
                if name.starts_with("torsion") {
                    torsion_terms_sup = torsion_terms_sup.max(t.max_abs());
                }
                sym.add_assign(&t)?;
                alt.add_assign(&t)?;
            }
        }
        Ok(())
    })?;
    Ok(RhsTotals {
        symmetrized: sym,
        holo_first: alt,
        torsion_terms_sup,
    })
}

pub fn ricci_evolution_totals(pkg: &ChernPackage) -> Result<RhsTotals> {
    let terms = ricci_evolution_terms(pkg)?;
    Ok(RhsTotals {
        symmetrized: terms.total(LaplacianConvention::Symmetrized)?,
        holo_first: terms.total(LaplacianConvention::HoloFirst)?,
        torsion_terms_sup: terms.torsion_terms().iter().map(|t| t.max_abs()).fold(0.0, f64::max),
    })
}

fn totals_for(pkg: &ChernPackage, which: Quantity) -> Result<RhsTotals> {
    match which {
        Quantity::FullCurvature => rm_evolution_totals(pkg),
        Quantity::FirstRicci => ricci_evolution_totals(pkg),
        Quantity::Metric => {
            let v = pkg.ric_second.scale(Complex64::new(-1.0, 0.0));
            Ok(RhsTotals {
                symmetrized: v.clone(),
                holo_first: v,
                torsion_terms_sup: 0.0,
            })
        }
    }
}

/// Full right-hand side of `∂_t R_{ij̄kl̄}` with the symmetrized Laplacian.
pub fn rhs_rm_evolution(state: &FlowState) -> Result<TensorField> {
    Ok(rm_evolution_totals(state.package()?)?.symmetrized)
}

/// Terms of the right-hand side of `∂_t R_{ij̄}` (first Ricci form), each at `(i, j)`.
#[derive(Debug, Clone)]
pub struct RicciEvolutionTerms {
    pub laplacian: TensorField,
    pub laplacian_holo_first: TensorField,
    /// `g^{rs̄} T^p_{ri} ∇_s̄ R_{pj̄}`.
    pub torsion_anti_gradient: TensorField,
    /// `g^{rs̄} T^{q̄}_{s̄j̄} ∇_r R_{iq̄}`.
    pub torsion_holo_gradient: TensorField,
    /// `g^{rs̄} T^p_{ri} T^{q̄}_{s̄j̄} R_{pq̄}`.
    pub torsion_torsion: TensorField,
    /// `R_{ij̄k}{}^p R_p{}^k`.
    pub quadratic: TensorField,
    /// `−½[S_i^p R_{pj̄} + S^{q̄}_{j̄} R_{iq̄}]`.
    pub second_ricci_terms: TensorField,
}

impl RicciEvolutionTerms {
    pub fn named(&self) -> [(&'static str, &TensorField); 6] {
        [
            ("laplacian", &self.laplacian),
            ("torsion_anti_gradient", &self.torsion_anti_gradient),
            ("torsion_holo_gradient", &self.torsion_holo_gradient),
            ("torsion_torsion", &self.torsion_torsion),
            ("quadratic", &self.quadratic),
            ("second_ricci_terms", &self.second_ricci_terms),
        ]
    }

    pub fn torsion_terms(&self) -> [&TensorField; 3] {
        [&self.torsion_anti_gradient, &self.torsion_holo_gradient, &self.torsion_torsion]
    }

    pub fn total(&self, convention: LaplacianConvention) -> Result<TensorField> {
        let mut out = match convention {
            LaplacianConvention::Symmetrized => self.laplacian.clone(),
            LaplacianConvention::HoloFirst => self.laplacian_holo_first.clone(),
        };
        for (_, t) in &self.named()[1..] {
            out.add_assign(t)?;
        }
        Ok(out)
    }
}

pub fn ricci_evolution_terms(pkg: &ChernPackage) -> Result<RicciEvolutionTerms> {
    let n = pkg.n();
    let grid = pkg.grid();
    let np = grid.num_points();
    let ric = &pkg.ric_first;
    let mix = &pkg.rm_mixed;
    let tor = &pkg.torsion;
    let gi = &pkg.g_inverse;
    let one = Complex64::new(1.0, 0.0);
    let zeros = || TensorField::zeros(grid, &HERMITIAN_FORM_SIGNATURE);

    let (laplacian_holo, anti) = laplacian_halves(ric, pkg)?;
    let laplacian_sym = symmetrized_from_halves(&laplacian_holo, anti)?;

    let mut t_anti = zeros();
    let mut t_holo = zeros();
    let mut tt = zeros();
    let mut coef = vec![ZERO; np];
    for r in 0..n {
        let dr = covariant_derivative_along(ric, pkg, Direction::Holo, r)?;
        for s in 0..n {
            let ds = covariant_derivative_along(ric, pkg, Direction::Anti, s)?;
            let g_rs = gi.comp_at(&[r, s]);
            for i in 0..n {
                for j in 0..n {
                    let c = comp_index(n, &[i, j]);
                    for p in 0..n {
                        coef.iter_mut()
                            .zip(g_rs)
                            .zip(tor.comp_at(&[r, i, p]))
                            .for_each(|((o, g), t)| *o = g * t);
                        mul_add(t_anti.comp_mut(c), one, &coef, ds.comp_at(&[p, j]));
                        for q in 0..n {
                            let tq = conj_of(tor.comp_at(&[s, j, q]));
                            mul3_add(tt.comp_mut(c), 1.0, &coef, &tq, ric.comp_at(&[p, q]));
                        }
                    }
                    for q in 0..n {
                        coef.iter_mut()
                            .zip(g_rs)
                            .zip(tor.comp_at(&[s, j, q]))
                            .for_each(|((o, g), t)| *o = g * t.conj());
                        mul_add(t_holo.comp_mut(c), one, &coef, dr.comp_at(&[i, q]));
                    }
                }
            }
        }
    }

    // R_p{}^k = g^{kl̄} R_{pl̄}
    let mut ric_raised = vec![vec![ZERO; np]; n * n];
    for p in 0..n {
        for k in 0..n {
            for l in 0..n {
                mul_add(&mut ric_raised[p * n + k], one, gi.comp_at(&[k, l]), ric.comp_at(&[p, l]));
            }
        }
    }
    let mut quad = zeros();
    for i in 0..n {
        for j in 0..n {
            let out = quad.comp_mut(comp_index(n, &[i, j]));
            for k in 0..n {
                for p in 0..n {
                    mul_add(out, one, mix.comp_at(&[i, j, k, p]), &ric_raised[p * n + k]);
                }
            }
        }
    }

    let (s_holo, s_anti) = raised_second_ricci(pkg);
    let half = Complex64::new(-0.5, 0.0);
    let mut sq = zeros();
    for i in 0..n {
        for j in 0..n {
            let out = sq.comp_mut(comp_index(n, &[i, j]));
            for p in 0..n {
                mul_add(out, half, &s_holo[i * n + p], ric.comp_at(&[p, j]));
                mul_add(out, half, &s_anti[j * n + p], ric.comp_at(&[i, p]));
            }
        }
    }

    Ok(RicciEvolutionTerms {
        laplacian: laplacian_sym,
        laplacian_holo_first: laplacian_holo,
        torsion_anti_gradient: t_anti,
        torsion_holo_gradient: t_holo,
        torsion_torsion: tt,
        quadratic: quad,
        second_ricci_terms: sq,
    })
}

/// Full right-hand side of `∂_t R_{ij̄}` with the symmetrized Laplacian.
pub fn rhs_ricci_evolution(state: &FlowState) -> Result<TensorField> {
    ricci_evolution_terms(state.package()?)?.total(LaplacianConvention::Symmetrized)
}

/// `sup |g^{kl̄} RHS_{ij̄kl̄} + S^{kl̄} R_{ij̄kl̄} − RHS_{ij̄}|`: tracing the curvature
/// equation (plus the term from `∂_t g^{kl̄} = S^{kl̄}`) must give the Ricci equation.
pub fn trace_compatibility(pkg: &ChernPackage, rhs_rm: &TensorField, rhs_ric: &TensorField) -> Result<f64> {
    let n = pkg.n();
    let np = pkg.grid().num_points();
    let gi = &pkg.g_inverse;
    let rm = &pkg.rm_lowered;
    let s = &pkg.ric_second;
    let one = Complex64::new(1.0, 0.0);
    let traced = first_ricci_trace(rhs_rm, gi)?;
    // S^{kl̄} = g^{kb̄} S_{ab̄} g^{al̄}
    let mut s_up = vec![vec![ZERO; np]; n * n];
    for k in 0..n {
        for l in 0..n {
            for a in 0..n {
                for b in 0..n {
                    mul3_add(&mut s_up[k * n + l], 1.0, gi.comp_at(&[k, b]), s.comp_at(&[a, b]), gi.comp_at(&[a, l]));
                }
            }
        }
    }
    let mut total = traced;
    for i in 0..n {
        for j in 0..n {
            let out = total.comp_mut(comp_index(n, &[i, j]));
            for k in 0..n {
                for l in 0..n {
                    mul_add(out, one, &s_up[k * n + l], rm.comp_at(&[i, j, k, l]));
                }
            }
        }
    }
    total.max_diff(rhs_ric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Metric,
    FullCurvature,
    FirstRicci,
}

fn quantity_of(g: &MetricField, q: Quantity) -> Result<TensorField> {
    Ok(match q {
        Quantity::Metric => g.field().clone(),
        Quantity::FullCurvature => crate::chern::curvature(g)?.1,
        Quantity::FirstRicci => {
            let (_, rm) = crate::chern::curvature(g)?;
            first_ricci_trace(&rm, &crate::chern::inverse_metric(g)?)?
        }
    })
}

/// `(Q(t*+δ) − Q(t*−δ)) / 2δ` with `Q` recomputed from the stored metrics.
pub fn fd_time_derivative(traj: &Trajectory, quantity: Quantity, t_star: f64, delta: f64) -> Result<TensorField> {
    if !(delta > 0.0) {
        return Err(HcfError::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let find = |t: f64| traj.find(t).ok_or(HcfError::MissingBracketingState { t });
    let plus = find(t_star + delta)?;
    let minus = find(t_star - delta)?;
    let (tp, gp) = &traj.states[plus];
    let (tm, gm) = &traj.states[minus];
    let mut d = quantity_of(gp, quantity)?.sub(&quantity_of(gm, quantity)?)?;
    let scale = 1.0 / (tp - tm);
    d.data_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(d)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResidual {
    pub which: Quantity,
    pub t_star: f64,
    pub delta: f64,
    pub resolution: usize,
    /// `sup |FD − RHS|` with the symmetrized Laplacian.
    pub sup: f64,
    pub mean: f64,
    /// `sup |FD − RHS|` with the Laplacian `g^{rs̄}∇_r∇_s̄`.
    pub sup_holo_first: f64,
    /// `sup |RHS|`, for scale.
    pub rhs_sup: f64,
    /// Largest torsion-bearing term.
    pub torsion_terms_sup: f64,
    /// Finite-difference derivative and assembled right-hand side, when kept.
    #[serde(skip)]
    pub fields: Option<(TensorField, TensorField)>,
}

/// Compares the finite-difference time derivative of the curvature along
/// `traj` with the assembled right-hand side at `t*`.
pub fn evolution_residual(traj: &Trajectory, which: Quantity, t_star: f64, delta: f64) -> Result<EvolutionResidual> {
    let at = traj.find(t_star).ok_or(HcfError::MissingBracketingState { t: t_star })?;
    let g = &traj.states[at].1;
    let totals = totals_for(&ChernPackage::compute(g)?, which)?;
    residual_against(traj, which, t_star, delta, &totals, true)
}

fn residual_against(
    traj: &Trajectory,
    which: Quantity,
    t_star: f64,
    delta: f64,
    totals: &RhsTotals,
    keep_fields: bool,
) -> Result<EvolutionResidual> {
    let lhs = fd_time_derivative(traj, which, t_star, delta)?;
    let diff = lhs.sub(&totals.symmetrized)?;
    Ok(EvolutionResidual {
        which,
        t_star,
        delta,
        resolution: lhs.grid().resolution(),
        sup: diff.max_abs(),
        mean: diff.mean_abs(),
        sup_holo_first: lhs.max_diff(&totals.holo_first)?,
        rhs_sup: totals.symmetrized.max_abs(),
        torsion_terms_sup: totals.torsion_terms_sup,
        fields: keep_fields.then(|| (lhs, totals.symmetrized.clone())),
    })
}

/// Integrates with a fixed step `dt` from `g0` and keeps the states at the
/// requested times (each must be a multiple of `dt`).
pub fn record_states(g0: &MetricField, times: &[f64], dt: f64) -> Result<Trajectory> {
    let mut wanted: Vec<u64> = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / dt).round();
        if !(t >= 0.0) || (k * dt - t).abs() > 1e-9 * dt {
            return Err(HcfError::InvalidInput(format!("time {t} is not a nonnegative multiple of dt = {dt}")));
        }
        wanted.push(k as u64);
    }
    wanted.sort_unstable();
    wanted.dedup();
    let mut traj = Trajectory::default();
    let mut state = FlowState::new(g0.clone());
    for &k in &wanted {
        while state.step < k {
            state = step_hcf(&state, dt)?;
        }
        traj.push(k as f64 * dt, state.g.clone());
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaStudy {
    pub t_star: f64,
    pub deltas: Vec<f64>,
    pub integrator_dt: f64,
    pub rm: Vec<EvolutionResidual>,
    pub ricci: Vec<EvolutionResidual>,
    /// `log₂` ratios of consecutive residuals, normalized by the δ ratio.
    pub rm_orders: Vec<f64>,
    pub ricci_orders: Vec<f64>,
}

fn orders(res: &[EvolutionResidual]) -> Vec<f64> {
    res.windows(2)
        .map(|w| (w[0].sup / w[1].sup).ln() / (w[0].delta / w[1].delta).ln())
        .collect()
}

/// Evolution residuals at `t*` for each `δ` (both curvature levels), from one
/// fixed-step integration with `substeps` steps per smallest `δ`.
pub fn delta_study(g0: &MetricField, t_star: f64, deltas: &[f64], substeps: usize) -> Result<DeltaStudy> {
    if deltas.is_empty() || substeps == 0 {
        return Err(HcfError::InvalidInput("delta study needs deltas and substeps > 0".into()));
    }
    let dmin = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(t_star - deltas.iter().cloned().fold(0.0, f64::max) >= -1e-15) {
        return Err(HcfError::InvalidInput("t* − δ must be nonnegative".into()));
    }
    let dt = dmin / substeps as f64;
    let mut times = vec![t_star];
    for d in deltas {
        times.push((t_star - d).max(0.0));
        times.push(t_star + d);
    }
    let traj = record_states(g0, &times, dt)?;
    let at = traj.find(t_star).ok_or(HcfError::MissingBracketingState { t: t_star })?;
    let pkg = ChernPackage::compute(&traj.states[at].1)?;
    let mut rm = Vec::new();
    let mut ricci = Vec::new();
    let totals = ricci_evolution_totals(&pkg)?;
    for &d in deltas {
        ricci.push(residual_against(&traj, Quantity::FirstRicci, t_star, d, &totals, false)?);
    }
    let totals = rm_evolution_totals(&pkg)?;
    drop(pkg);
    for &d in deltas {
        rm.push(residual_against(&traj, Quantity::FullCurvature, t_star, d, &totals, false)?);
    }
    Ok(DeltaStudy {
        t_star,
        deltas: deltas.to_vec(),
        integrator_dt: dt,
        rm_orders: orders(&rm),
        ricci_orders: orders(&ricci),
        rm,
        ricci,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResidual {
    pub name: &'static str,
    pub description: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub n: usize,
    pub resolution: usize,
    pub entries: Vec<IdentityResidual>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityResidual> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn max_value(&self) -> f64 {
        self.entries.iter().map(|e| e.value).fold(0.0, f64::max)
    }

    /// One line per identity: `PASS|FAIL name value tolerance`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!(
                "{} {:<28} {:>11.3e} tol {:>9.1e}  {}\n",
                if e.pass { "PASS" } else { "FAIL" },
                e.name,
                e.value,
                e.tolerance,
                e.description
            ));
        }
        s
    }
}

fn random_test_field(grid: &std::sync::Arc<crate::grid::TorusGrid>, slot: Slot, rng: &mut ChaCha8Rng) -> Result<TensorField> {
    let n = grid.n();
    let mut data = Vec::with_capacity(n * grid.num_points());
    for _ in 0..n {
        let re = seeded_real_mix(grid.periods(), 1.0, 3, rng).sample(grid);
        let im = seeded_real_mix(grid.periods(), 1.0, 3, rng).sample(grid);
        data.extend(re.iter().zip(&im).map(|(a, b)| Complex64::new(a.re, b.re)));
    }
    TensorField::from_data(grid, &[slot], data)
}

/// `[∇_i, ∇_j̄] V` at `(v, i, j)` for a rank-1 field.
fn commutator(v: &TensorField, pkg: &ChernPackage) -> Result<TensorField> {
    let n = pkg.n();
    let np = v.num_points();
    let a = covariant_derivative(&covariant_derivative(v, pkg, Direction::Anti)?, pkg, Direction::Holo)?;
    let b = covariant_derivative(&covariant_derivative(v, pkg, Direction::Holo)?, pkg, Direction::Anti)?;
    let mut out = TensorField::zeros(v.grid(), &[v.signature()[0], Slot::LOWER_HOLO, Slot::LOWER_ANTI]);
    for x in 0..n {
        for i in 0..n {
            for j in 0..n {
                let o = out.comp_mut(comp_index(n, &[x, i, j]));
                let pa = a.comp_at(&[x, j, i]);
                let pb = b.comp_at(&[x, i, j]);
                for p in 0..np {
                    o[p] = pa[p] - pb[p];
                }
            }
        }
    }
    Ok(out)
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Commutation rules of `[∇_i, ∇_j̄]` on the four rank-1 field types, on seeded test fields.
fn commutation_residuals(pkg: &ChernPackage, seed: u64) -> Result<[f64; 4]> {
    let n = pkg.n();
    let grid = pkg.grid();
    let np = grid.num_points();
    let mix = &pkg.rm_mixed;
    let rm = &pkg.rm_lowered;
    let gi = &pkg.g_inverse;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [0.0; 4];
    let slots = [Slot::UPPER_HOLO, Slot::LOWER_HOLO, Slot::UPPER_ANTI, Slot::LOWER_ANTI];
    for (case, slot) in slots.into_iter().enumerate() {
        let v = random_test_field(grid, slot, &mut rng)?;
        let lhs = commutator(&v, pkg)?;
        let mut worst: f64 = 0.0;
        let mut expect = vec![ZERO; np];
        for x in 0..n {
            for i in 0..n {
                for j in 0..n {
                    expect.fill(ZERO);
                    let one = Complex64::new(1.0, 0.0);
                    match case {
                        // R_{ij̄k}{}^l X^k
                        0 => (0..n).for_each(|k| mul_add(&mut expect, one, mix.comp_at(&[i, j, k, x]), v.comp(k))),
                        // −R_{ij̄k}{}^l a_l
                        1 => (0..n).for_each(|l| mul_add(&mut expect, -one, mix.comp_at(&[i, j, x, l]), v.comp(l))),
                        // −g^{pl̄} R_{ij̄pk̄} X^{k̄}
                        2 => {
                            for k in 0..n {
                                for p in 0..n {
                                    mul3_add(&mut expect, -1.0, gi.comp_at(&[p, x]), rm.comp_at(&[i, j, p, k]), v.comp(k));
                                }
                            }
                        }
                        // g^{pl̄} R_{ij̄pk̄} a_{l̄}
                        _ => {
                            for l in 0..n {
                                for p in 0..n {
                                    mul3_add(&mut expect, 1.0, gi.comp_at(&[p, l]), rm.comp_at(&[i, j, p, x]), v.comp(l));
                                }
                            }
                        }
                    }
                    worst = worst.max(max_abs_diff(lhs.comp_at(&[x, i, j]), &expect));
                }
            }
        }
        out[case] = worst;
    }
    Ok(out)
}

/// Torsion identities relating curvature symmetries to derivatives of the torsion.
fn torsion_symmetry_residuals(pkg: &ChernPackage) -> Result<[f64; 4]> {
    let n = pkg.n();
    let np = pkg.grid().num_points();
    let rm = &pkg.rm_lowered;
    let t = &pkg.torsion_lowered;
    let tc = pkg.torsion_lowered_conj();
    let dt_anti = covariant_derivative(t, pkg, Direction::Anti)?;
    let dt_holo = covariant_derivative(t, pkg, Direction::Holo)?;
    let dtc_holo = covariant_derivative(&tc, pkg, Direction::Holo)?;
    let dtc_anti = covariant_derivative(&tc, pkg, Direction::Anti)?;
    drop(dt_holo);
    drop(dtc_anti);
    let mut worst = [0.0f64; 4];
    let dt_anti_l = &dt_anti;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = rm.comp_at(&[i, j, k, l]);
                    let r_kjil = rm.comp_at(&[k, j, i, l]);
                    let r_ilkj = rm.comp_at(&[i, l, k, j]);
                    let r_klij = rm.comp_at(&[k, l, i, j]);
                    let a = dt_anti_l.comp_at(&[i, k, l, j]); // ∇_j̄ T_{ikl̄}
                    let b = dtc_holo.comp_at(&[j, l, k, i]); // ∇_i T_{j̄l̄k}
                    let c = dtc_holo.comp_at(&[j, l, i, k]); // ∇_k T_{j̄l̄i}
                    let d = dt_anti_l.comp_at(&[i, k, j, l]); // ∇_l̄ T_{ikj̄}
                    for p in 0..np {
                        worst[0] = worst[0].max((r[p] - r_kjil[p] + a[p]).norm());
                        worst[1] = worst[1].max((r[p] - r_ilkj[p] + b[p]).norm());
                        worst[2] = worst[2].max((r[p] - r_klij[p] + a[p] + c[p]).norm());
                        worst[3] = worst[3].max((r[p] - r_klij[p] + b[p] + d[p]).norm());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Second Bianchi identities with torsion, holomorphic and antiholomorphic.
fn bianchi_residuals(pkg: &ChernPackage) -> Result<[f64; 2]> {
    let n = pkg.n();
    let np = pkg.grid().num_points();
    let rm = &pkg.rm_lowered;
    let tor = &pkg.torsion;
    let mut acc = vec![ZERO; np];
    let mut worst = [0.0f64; 2];
    {
        let d = covariant_derivative(rm, pkg, Direction::Holo)?;
        // ∇_p R_{ij̄kl̄} − ∇_i R_{pj̄kl̄} + T^r_{pi} R_{rj̄kl̄}
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let a = d.comp_at(&[i, j, k, l, p]);
                            let b = d.comp_at(&[p, j, k, l, i]);
                            for q in 0..np {
                                acc[q] = a[q] - b[q];
                            }
                            for r in 0..n {
                                mul_add(&mut acc, Complex64::new(1.0, 0.0), tor.comp_at(&[p, i, r]), rm.comp_at(&[r, j, k, l]));
                            }
                            worst[0] = worst[0].max(acc.iter().map(|v| v.norm()).fold(0.0, f64::max));
                        }
                    }
                }
            }
        }
    }
    let d = covariant_derivative(rm, pkg, Direction::Anti)?;
    // ∇_q̄ R_{ij̄kl̄} − ∇_j̄ R_{iq̄kl̄} + conj(T^s_{qj}) R_{is̄kl̄}
    for q in 0..n {
        for j in 0..n {
            for i in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = d.comp_at(&[i, j, k, l, q]);
                        let b = d.comp_at(&[i, q, k, l, j]);
                        for p in 0..np {
                            acc[p] = a[p] - b[p];
                        }
                        for s in 0..n {
                            let ts = conj_of(tor.comp_at(&[q, j, s]));
                            mul_add(&mut acc, Complex64::new(1.0, 0.0), &ts, rm.comp_at(&[i, s, k, l]));
                        }
                        worst[1] = worst[1].max(acc.iter().map(|v| v.norm()).fold(0.0, f64::max));
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// `sup |conj(R_{ij̄kl̄}) − R_{jīlk̄}|`.
fn conjugation_residual(rm: &TensorField) -> f64 {
    let n = rm.n();
    let mut worst: f64 = 0.0;
    for c in 0..rm.num_components() {
        let idx = comp_multi_index(n, 4, c);
        let a = rm.comp(c);
        let b = rm.comp_at(&[idx[1], idx[0], idx[3], idx[2]]);
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x.conj() - y).norm());
        }
    }
    worst
}

fn hermitian_residual(h: &TensorField) -> f64 {
    let n = h.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(max_abs_diff(h.comp_at(&[i, j]), &conj_of(h.comp_at(&[j, i]))));
        }
    }
    worst
}

const DESCRIPTIONS: [(&str, &str); 15] = [
    ("commutator_vector", "[∇_i,∇_j̄]X^l = R_{ij̄k}^l X^k"),
    ("commutator_form", "[∇_i,∇_j̄]a_k = −R_{ij̄k}^l a_l"),
    ("commutator_conj_vector", "[∇_i,∇_j̄]X^l̄ = −R_{ij̄}^l̄_k̄ X^k̄"),
    ("commutator_conj_form", "[∇_i,∇_j̄]a_k̄ = R_{ij̄}^l̄_k̄ a_l̄"),
    ("torsion_swap_holo", "R_{ij̄kl̄} − R_{kj̄il̄} = −∇_j̄T_{ikl̄}"),
    ("torsion_swap_anti", "R_{ij̄kl̄} − R_{il̄kj̄} = −∇_iT_{j̄l̄k}"),
    ("torsion_swap_pairs", "R_{ij̄kl̄} − R_{kl̄ij̄} = −∇_j̄T_{ikl̄} − ∇_kT_{j̄l̄i}"),
    ("torsion_swap_pairs_alt", "R_{ij̄kl̄} − R_{kl̄ij̄} = −∇_iT_{j̄l̄k} − ∇_l̄T_{ikj̄}"),
    ("bianchi_holo", "∇_pR_{ij̄kl̄} − ∇_iR_{pj̄kl̄} = −T^r_{pi}R_{rj̄kl̄}"),
    ("bianchi_anti", "∇_q̄R_{ij̄kl̄} − ∇_j̄R_{iq̄kl̄} = −T^s̄_{q̄j̄}R_{is̄kl̄}"),
    ("conjugation_symmetry", "conj(R_{ij̄kl̄}) = R_{jīlk̄}"),
    ("metric_parallel", "∇g = 0 (both directions)"),
    ("ricci_trace_vs_logdet", "g^{kl̄}R_{ij̄kl̄} = −∂_i∂_j̄ log det g"),
    ("b_trace", "g^{kl̄}B_{ij̄kl̄} = (n+1)g_{ij̄}"),
    ("ricci_forms_hermitian", "R_{ij̄} and S_{ij̄} Hermitian"),
];

fn description(name: &str) -> &'static str {
    DESCRIPTIONS.iter().find(|(n, _)| *n == name).map(|(_, d)| *d).unwrap_or("")
}

/// All pointwise identities of one metric, each judged against `tolerance`.
pub fn identity_suite(pkg: &ChernPackage, tolerance: f64, seed: u64) -> Result<IdentityReport> {
    let mut values: Vec<(&'static str, f64)> = Vec::new();
    let comm = commutation_residuals(pkg, seed)?;
    values.extend(DESCRIPTIONS[0..4].iter().map(|(n, _)| *n).zip(comm));
    let tors = torsion_symmetry_residuals(pkg)?;
    values.extend(DESCRIPTIONS[4..8].iter().map(|(n, _)| *n).zip(tors));
    let bianchi = bianchi_residuals(pkg)?;
    values.extend(DESCRIPTIONS[8..10].iter().map(|(n, _)| *n).zip(bianchi));
    values.push(("conjugation_symmetry", conjugation_residual(&pkg.rm_lowered)));
    let g = pkg.metric.field();
    let parallel = covariant_derivative(g, pkg, Direction::Holo)?
        .max_abs()
        .max(covariant_derivative(g, pkg, Direction::Anti)?.max_abs());
    values.push(("metric_parallel", parallel));
    values.push((
        "ricci_trace_vs_logdet",
        pkg.ric_first.max_diff(&first_ricci_logdet(&pkg.metric)?)?,
    ));
    values.push((
        "b_trace",
        b_trace_residual(&b_tensor(&pkg.metric), &pkg.metric, &pkg.g_inverse)?,
    ));
    values.push((
        "ricci_forms_hermitian",
        hermitian_residual(&pkg.ric_first).max(hermitian_residual(&pkg.ric_second)),
    ));
    Ok(IdentityReport {
        n: pkg.n(),
        resolution: pkg.grid().resolution(),
        entries: values
            .into_iter()
            .map(|(name, value)| IdentityResidual {
                name,
                description: description(name),
                value,
                tolerance,
                pass: value <= tolerance,
            })
            .collect(),
    })
}
