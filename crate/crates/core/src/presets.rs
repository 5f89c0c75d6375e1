//! Named initial metrics built from trigonometric polynomials.
//!
//! Every preset keeps its closed form, so tests can evaluate the metric and
//! its derivatives at any point without going through the grid kernels.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HcfError, Result};
use crate::grid::TorusGrid;
use crate::linalg;
use crate::symbolic::TrigPoly;
use crate::tensor::{MetricField, TensorField, METRIC_SIGNATURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    Flat,
    Conformal,
    KahlerPotential,
    NonKahler,
    /// Flat metric whose curvature is replaced by `R = −B` for the condition checks.
    SyntheticInjection,
}

impl PresetKind {
    pub const ALL: [PresetKind; 5] = [
        PresetKind::Flat,
        PresetKind::Conformal,
        PresetKind::KahlerPotential,
        PresetKind::NonKahler,
        PresetKind::SyntheticInjection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::Flat => "flat",
            PresetKind::Conformal => "conformal",
            PresetKind::KahlerPotential => "kahler_potential",
            PresetKind::NonKahler => "non_kahler",
            PresetKind::SyntheticInjection => "synthetic_injection",
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = HcfError;

    fn from_str(s: &str) -> Result<Self> {
        PresetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PresetKind::ALL.iter().map(|k| k.name()).collect();
                HcfError::InvalidInput(format!("unknown preset '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    pub amplitude: f64,
    pub modes: usize,
    pub seed: u64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            modes: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
enum Form {
    /// `g_{ij̄}` entries, row-major.
    Entries(Vec<TrigPoly>),
    /// `g = e^u δ`.
    Conformal(TrigPoly),
}

/// Metric value and derivatives at one point: `g`, `∂_a g`, `∂_b̄ g`, `∂_b̄ ∂_a g`.
/// Matrices are indexed `[i][j] = g_{ij̄}`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<Complex64>,
    pub d_holo: Vec<DMatrix<Complex64>>,
    pub d_anti: Vec<DMatrix<Complex64>>,
    /// `d_mixed[b][a] = ∂_b̄ ∂_a g`.
    pub d_mixed: Vec<Vec<DMatrix<Complex64>>>,
}

impl MetricJet {
    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    /// `g^{kl̄}` as `[k][l]`.
    pub fn inverse(&self) -> Result<DMatrix<Complex64>> {
        let inv = linalg::inverse(&self.g).ok_or_else(|| HcfError::SingularMetric {
            point: 0,
            min_eigenvalue: linalg::min_hermitian_eigenvalue(&self.g),
        })?;
        Ok(inv.transpose())
    }

    /// `Γ^k_{ij}` as a flat array at `(i, j, k)`.
    pub fn christoffel(&self) -> Result<Vec<Complex64>> {
        let n = self.n();
        let h = self.inverse()?;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + j) * n + k] = (0..n).map(|l| h[(k, l)] * self.d_holo[i][(j, l)]).sum();
                }
            }
        }
        Ok(out)
    }

    /// `R_{ij̄k}{}^l` as a flat array at `(i, j, k, l)`.
    pub fn rm_mixed(&self) -> Result<Vec<Complex64>> {
        let n = self.n();
        let h = self.inverse()?;
        let mut out = vec![Complex64::new(0.0, 0.0); n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        // ∂_j̄ Γ^l_{ik} = ∂_j̄ g^{lm̄} ∂_i g_{km̄} + g^{lm̄} ∂_j̄ ∂_i g_{km̄}
                        // with ∂_j̄ g^{lm̄} = −g^{pm̄} ∂_j̄ g_{pq̄} g^{lq̄}
                        let mut v = Complex64::new(0.0, 0.0);
                        for m in 0..n {
                            let mut dh = Complex64::new(0.0, 0.0);
                            for p in 0..n {
                                for q in 0..n {
                                    dh -= h[(p, m)] * self.d_anti[j][(p, q)] * h[(l, q)];
                                }
                            }
                            v += dh * self.d_holo[i][(k, m)] + h[(l, m)] * self.d_mixed[j][i][(k, m)];
                        }
                        out[((i * n + j) * n + k) * n + l] = -v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `R_{ij̄kl̄}` as a flat array.
    pub fn rm_lowered(&self) -> Result<Vec<Complex64>> {
        let n = self.n();
        let mixed = self.rm_mixed()?;
        let mut out = vec![Complex64::new(0.0, 0.0); n.pow(4)];
        for ijk in 0..n.pow(3) {
            for l in 0..n {
                out[ijk * n + l] = (0..n).map(|p| self.g[(p, l)] * mixed[ijk * n + p]).sum();
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    kind: PresetKind,
    n: usize,
    params: PresetParams,
    form: Form,
}

/// `amplitude/modes · Σ cos(k·θ + φ)` with seeded wave vectors `k ∈ {−1,0,1}^{2n} \ {0}`.
pub fn seeded_real_mix(periods: &[f64], amplitude: f64, modes: usize, rng: &mut ChaCha8Rng) -> TrigPoly {
    let dims = periods.len();
    let mut out = TrigPoly::zero(periods);
    if modes == 0 {
        return out;
    }
    let weight = amplitude / modes as f64;
    for _ in 0..modes {
        let k = loop {
            let k: Vec<i32> = (0..dims).map(|_| rng.gen_range(-1..=1)).collect();
            if k.iter().any(|&v| v != 0) {
                break k;
            }
        };
        let phase = rng.gen_range(0.0..TAU);
        let half = Complex64::from_polar(weight / 2.0, phase);
        let neg: Vec<i32> = k.iter().map(|v| -v).collect();
        out = out
            .add(&TrigPoly::mode(periods, &k, half))
            .add(&TrigPoly::mode(periods, &neg, half.conj()));
    }
    out
}

fn delta(periods: &[f64], i: usize, j: usize) -> TrigPoly {
    if i == j {
        TrigPoly::constant(periods, Complex64::new(1.0, 0.0))
    } else {
        TrigPoly::zero(periods)
    }
}

impl Preset {
    pub fn new(kind: PresetKind, n: usize, params: PresetParams) -> Result<Self> {
        Self::with_periods(kind, n, params, &vec![TAU; 2 * n])
    }

    pub fn with_periods(kind: PresetKind, n: usize, params: PresetParams, periods: &[f64]) -> Result<Self> {
        if periods.len() != 2 * n {
            return Err(HcfError::InvalidInput(format!(
                "preset needs {} periods, got {}",
                2 * n,
                periods.len()
            )));
        }
        if !params.amplitude.is_finite() {
            return Err(HcfError::InvalidInput("amplitude must be finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let flat = || {
            let mut e = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    e.push(delta(periods, i, j));
                }
            }
            e
        };
        let form = match kind {
            PresetKind::Flat | PresetKind::SyntheticInjection => Form::Entries(flat()),
            PresetKind::Conformal => {
                Form::Conformal(seeded_real_mix(periods, params.amplitude, params.modes, &mut rng))
            }
            PresetKind::KahlerPotential => {
                let phi = seeded_real_mix(periods, params.amplitude, params.modes, &mut rng);
                let mut e = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        e.push(delta(periods, i, j).add(&phi.d_anti(j).d_holo(i)));
                    }
                }
                Form::Entries(e)
            }
            PresetKind::NonKahler => {
                // δ + a(∂_i f ∂_j̄ h + ∂_i h ∂_j̄ f) with real f ≠ h; the
                // symmetrized product keeps every entry Hermitian.
                let f = seeded_real_mix(periods, 1.0, params.modes, &mut rng);
                let h = seeded_real_mix(periods, 1.0, params.modes, &mut rng);
                let a = Complex64::new(params.amplitude, 0.0);
                let mut e = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let p = f.d_holo(i).mul(&h.d_anti(j)).add(&h.d_holo(i).mul(&f.d_anti(j)));
                        e.push(delta(periods, i, j).add(&p.scale(a)));
                    }
                }
                Form::Entries(e)
            }
        };
        Ok(Self { kind, n, params, form })
    }

    pub fn kind(&self) -> PresetKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> PresetParams {
        self.params
    }

    /// True when the metric comes from a Kähler potential (or is trivially
    /// Kähler: flat, or any metric in one complex dimension).
    pub fn kahler(&self) -> bool {
        match self.kind {
            PresetKind::Flat | PresetKind::KahlerPotential | PresetKind::SyntheticInjection => true,
            PresetKind::Conformal | PresetKind::NonKahler => self.n == 1 || self.params.amplitude == 0.0,
        }
    }

    /// Conformal factor `u` of `g = e^u δ`, if this is a conformal preset.
    pub fn conformal_factor(&self) -> Option<&TrigPoly> {
        match &self.form {
            Form::Conformal(u) => Some(u),
            Form::Entries(_) => None,
        }
    }

    /// Metric entries as trigonometric polynomials, if the preset has that form.
    pub fn entries(&self) -> Option<&[TrigPoly]> {
        match &self.form {
            Form::Entries(e) => Some(e),
            Form::Conformal(_) => None,
        }
    }

    pub fn sample(&self, grid: &Arc<TorusGrid>) -> Result<MetricField> {
        if grid.n() != self.n {
            return Err(HcfError::GridMismatch);
        }
        let np = grid.num_points();
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n * np];
        match &self.form {
            Form::Entries(e) => {
                for (c, poly) in e.iter().enumerate() {
                    data[c * np..(c + 1) * np].copy_from_slice(&poly.sample(grid));
                }
            }
            Form::Conformal(u) => {
                let eu: Vec<Complex64> = u.sample(grid).iter().map(|v| Complex64::new(v.re.exp(), 0.0)).collect();
                for i in 0..n {
                    let c = i * n + i;
                    data[c * np..(c + 1) * np].copy_from_slice(&eu);
                }
            }
        }
        MetricField::new(TensorField::from_data(grid, &METRIC_SIGNATURE, data)?)
    }

    /// Closed-form metric jet at real coordinates `x`.
    pub fn jet_at(&self, x: &[f64]) -> MetricJet {
        let n = self.n;
        let zero = || DMatrix::<Complex64>::zeros(n, n);
        let mut jet = MetricJet {
            g: zero(),
            d_holo: vec![zero(); n],
            d_anti: vec![zero(); n],
            d_mixed: vec![vec![zero(); n]; n],
        };
        match &self.form {
            Form::Entries(e) => {
                for i in 0..n {
                    for j in 0..n {
                        let p = &e[i * n + j];
                        jet.g[(i, j)] = p.eval(x);
                        for a in 0..n {
                            jet.d_holo[a][(i, j)] = p.d_holo(a).eval(x);
                            jet.d_anti[a][(i, j)] = p.d_anti(a).eval(x);
                            for b in 0..n {
                                jet.d_mixed[b][a][(i, j)] = p.d_holo(a).d_anti(b).eval(x);
                            }
                        }
                    }
                }
            }
            Form::Conformal(u) => {
                let eu = u.eval(x).re.exp();
                let du: Vec<Complex64> = (0..n).map(|a| u.d_holo(a).eval(x)).collect();
                let dbu: Vec<Complex64> = (0..n).map(|a| u.d_anti(a).eval(x)).collect();
                for i in 0..n {
                    jet.g[(i, i)] = Complex64::new(eu, 0.0);
                    for a in 0..n {
                        jet.d_holo[a][(i, i)] = du[a] * eu;
                        jet.d_anti[a][(i, i)] = dbu[a] * eu;
                        for b in 0..n {
                            let ddu = u.d_holo(a).d_anti(b).eval(x);
                            jet.d_mixed[b][a][(i, i)] = (ddu + du[a] * dbu[b]) * eu;
                        }
                    }
                }
            }
        }
        jet
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DerivativeMode;

    #[test]
    fn names_roundtrip() {
        for k in PresetKind::ALL {
            assert_eq!(k.name().parse::<PresetKind>().unwrap(), k);
        }
        assert!("sphere".parse::<PresetKind>().is_err());
    }

    #[test]
    fn same_seed_same_metric() {
        let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
        let p = PresetParams::default();
        let a = Preset::new(PresetKind::NonKahler, 2, p).unwrap().sample(&grid).unwrap();
        let b = Preset::new(PresetKind::NonKahler, 2, p).unwrap().sample(&grid).unwrap();
        assert_eq!(a.field().data(), b.field().data());
        let q = PresetParams { seed: 8, ..p };
        let c = Preset::new(PresetKind::NonKahler, 2, q).unwrap().sample(&grid).unwrap();
        assert_ne!(a.field().data(), c.field().data());
    }

    #[test]
    fn sampled_entries_match_jet() {
        let grid = TorusGrid::periodic(2, 8, DerivativeMode::Spectral).unwrap();
        for kind in [PresetKind::Conformal, PresetKind::KahlerPotential, PresetKind::NonKahler] {
            let preset = Preset::new(kind, 2, PresetParams::default()).unwrap();
            let g = preset.sample(&grid).unwrap();
            for p in [0, 17, 1000, 4095] {
                let jet = preset.jet_at(&grid.coordinates(p));
                assert!((g.matrix_at(p) - &jet.g).norm() < 1e-13, "{kind} at {p}");
            }
        }
    }

    #[test]
    fn oversized_amplitude_is_rejected() {
        let grid = TorusGrid::periodic(1, 8, DerivativeMode::Spectral).unwrap();
        let p = PresetParams {
            amplitude: 50.0,
            modes: 1,
            seed: 1,
        };
        let preset = Preset::new(PresetKind::KahlerPotential, 1, p).unwrap();
        assert!(preset.sample(&grid).is_err());
    }
}
