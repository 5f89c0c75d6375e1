//! Exact trigonometric-polynomial algebra on the real coordinates of the torus.
//!
//! A [`TrigPoly`] is a finite sum `Σ c_k exp(i k·θ)` with integer wave vectors
//! `k` and `θ_α = 2π x_α / P_α`. The set is closed under products, complex
//! conjugation and the Wirtinger derivatives, so closed forms for band-limited
//! presets (metric entries, Kähler potentials, conformal factors) and the
//! symbolic oracles used by the test suites are computed without touching the
//! grid derivative kernels.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::grid::TorusGrid;

const DROP_BELOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    periods: Vec<f64>,
    terms: BTreeMap<Vec<i32>, Complex64>,
}

impl TrigPoly {
    pub fn zero(periods: &[f64]) -> Self {
        Self {
            periods: periods.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(periods: &[f64], c: Complex64) -> Self {
        let mut p = Self::zero(periods);
        p.add_term(vec![0; periods.len()], c);
        p
    }

    /// `c · exp(i k·θ)`.
    pub fn mode(periods: &[f64], k: &[i32], c: Complex64) -> Self {
        assert_eq!(k.len(), periods.len(), "wave vector length");
        let mut p = Self::zero(periods);
        p.add_term(k.to_vec(), c);
        p
    }

    /// `amp · cos(m θ_axis + phase)`.
    pub fn cos(periods: &[f64], axis: usize, m: i32, amp: f64, phase: f64) -> Self {
        let mut k = vec![0; periods.len()];
        k[axis] = m;
        let half = Complex64::from_polar(amp / 2.0, phase);
        let mut p = Self::mode(periods, &k, half);
        k[axis] = -m;
        p.add_term(k, half.conj());
        p
    }

    /// `amp · sin(m θ_axis + phase)`.
    pub fn sin(periods: &[f64], axis: usize, m: i32, amp: f64, phase: f64) -> Self {
        Self::cos(periods, axis, m, amp, phase - std::f64::consts::FRAC_PI_2)
    }

    pub fn dims(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest |k_α| over all terms and axes.
    pub fn max_wavenumber(&self) -> i32 {
        self.terms
            .keys()
            .flat_map(|k| k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, k: Vec<i32>, c: Complex64) {
        let entry = self.terms.entry(k).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        let drop = entry.norm() < DROP_BELOW;
        if drop {
            self.terms.retain(|_, v| v.norm() >= DROP_BELOW);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(&self.periods);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(&self.periods);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let k: Vec<i32> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.add_term(k, ca * cb);
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::zero(&self.periods);
        for (k, c) in &self.terms {
            out.add_term(k.iter().map(|v| -v).collect(), c.conj());
        }
        out
    }

    pub fn re(&self) -> Self {
        self.add(&self.conj()).scale(Complex64::new(0.5, 0.0))
    }

    /// Derivative along real axis `axis`.
    pub fn d_real(&self, axis: usize) -> Self {
        let s = TAU / self.periods[axis];
        let mut out = Self::zero(&self.periods);
        for (k, c) in &self.terms {
            if k[axis] != 0 {
                out.add_term(k.clone(), c * Complex64::new(0.0, k[axis] as f64 * s));
            }
        }
        out
    }

    /// `∂/∂z^a = ½(∂_x − i ∂_y)` with `x = axis 2a`, `y = axis 2a+1`.
    pub fn d_holo(&self, a: usize) -> Self {
        let dx = self.d_real(2 * a);
        let dy = self.d_real(2 * a + 1);
        dx.sub(&dy.scale(Complex64::new(0.0, 1.0)))
            .scale(Complex64::new(0.5, 0.0))
    }

    /// `∂/∂z̄^a = ½(∂_x + i ∂_y)`.
    pub fn d_anti(&self, a: usize) -> Self {
        let dx = self.d_real(2 * a);
        let dy = self.d_real(2 * a + 1);
        dx.add(&dy.scale(Complex64::new(0.0, 1.0)))
            .scale(Complex64::new(0.5, 0.0))
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                let phase: f64 = k
                    .iter()
                    .zip(x)
                    .zip(&self.periods)
                    .map(|((&ki, &xi), &p)| ki as f64 * TAU * xi / p)
                    .sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Samples the polynomial at every grid point (grid point order).
    pub fn sample(&self, grid: &TorusGrid) -> Vec<Complex64> {
        assert_eq!(self.dims(), grid.real_dims(), "dimension mismatch");
        let res = grid.resolution();
        let dims = self.dims();
        let mut out = vec![Complex64::new(0.0, 0.0); grid.num_points()];
        for (k, c) in &self.terms {
            // Per-axis phase tables, exact in the grid index.
            let tables: Vec<Vec<Complex64>> = (0..dims)
                .map(|a| {
                    (0..res)
                        .map(|j| {
                            let m = (k[a] as i64 * j as i64).rem_euclid(res as i64);
                            Complex64::from_polar(1.0, TAU * m as f64 / res as f64)
                        })
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; dims];
            for v in out.iter_mut() {
                let mut w = *c;
                for a in 0..dims {
                    w *= tables[a][idx[a]];
                }
                *v += w;
                for a in (0..dims).rev() {
                    idx[a] += 1;
                    if idx[a] < res {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        out
    }
}
