//! Grid-valued complex tensors with typed index slots.
//!
//! Storage is component-major: component `c` occupies
//! `data[c·N_pts .. (c+1)·N_pts]`, and the component index of a multi-index
//! `(i₀, …, i_{r−1})` is `Σ i_s n^(r−1−s)` (first slot slowest).

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{HcfError, Result};
use crate::grid::TorusGrid;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Holomorphy {
    Holo,
    Anti,
}

impl Holomorphy {
    pub fn flip(self) -> Self {
        match self {
            Holomorphy::Holo => Holomorphy::Anti,
            Holomorphy::Anti => Holomorphy::Holo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variance {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub holomorphy: Holomorphy,
    pub variance: Variance,
}

impl Slot {
    pub const LOWER_HOLO: Slot = Slot {
        holomorphy: Holomorphy::Holo,
        variance: Variance::Lower,
    };
    pub const LOWER_ANTI: Slot = Slot {
        holomorphy: Holomorphy::Anti,
        variance: Variance::Lower,
    };
    pub const UPPER_HOLO: Slot = Slot {
        holomorphy: Holomorphy::Holo,
        variance: Variance::Upper,
    };
    pub const UPPER_ANTI: Slot = Slot {
        holomorphy: Holomorphy::Anti,
        variance: Variance::Upper,
    };

    pub fn conj(self) -> Self {
        Slot {
            holomorphy: self.holomorphy.flip(),
            variance: self.variance,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match self.holomorphy {
            Holomorphy::Holo => "h",
            Holomorphy::Anti => "a",
        };
        let v = match self.variance {
            Variance::Upper => "^",
            Variance::Lower => "_",
        };
        write!(f, "{v}{h}")
    }
}

/// Row-major multi-index helpers for rank-`r` tensors in dimension `n`.
pub fn comp_index(n: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

pub fn comp_multi_index(n: usize, rank: usize, mut c: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for s in (0..rank).rev() {
        idx[s] = c % n;
        c /= n;
    }
    idx
}

#[derive(Clone)]
pub struct TensorField {
    grid: Arc<TorusGrid>,
    signature: Vec<Slot>,
    data: Vec<Complex64>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig: Vec<String> = self.signature.iter().map(|s| s.to_string()).collect();
        f.debug_struct("TensorField")
            .field("grid", &self.grid.spec())
            .field("signature", &sig)
            .finish()
    }
}

impl TensorField {
    pub fn zeros(grid: &Arc<TorusGrid>, signature: &[Slot]) -> Self {
        let comps = grid.n().pow(signature.len() as u32);
        Self {
            grid: Arc::clone(grid),
            signature: signature.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); comps * grid.num_points()],
        }
    }

    pub fn from_data(grid: &Arc<TorusGrid>, signature: &[Slot], data: Vec<Complex64>) -> Result<Self> {
        let comps = grid.n().pow(signature.len() as u32);
        if data.len() != comps * grid.num_points() {
            return Err(HcfError::InvalidInput(format!(
                "expected {} values, got {}",
                comps * grid.num_points(),
                data.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            signature: signature.to_vec(),
            data,
        })
    }

    /// Scalar (rank-0) field.
    pub fn scalar(grid: &Arc<TorusGrid>, values: Vec<Complex64>) -> Result<Self> {
        Self::from_data(grid, &[], values)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn rank(&self) -> usize {
        self.signature.len()
    }

    pub fn signature(&self) -> &[Slot] {
        &self.signature
    }

    pub fn num_components(&self) -> usize {
        self.n().pow(self.rank() as u32)
    }

    pub fn num_points(&self) -> usize {
        self.grid.num_points()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let np = self.num_points();
        &self.data[c * np..(c + 1) * np]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let np = self.num_points();
        &mut self.data[c * np..(c + 1) * np]
    }

    pub fn comp_at(&self, idx: &[usize]) -> &[Complex64] {
        self.comp(comp_index(self.n(), idx))
    }

    pub fn get(&self, idx: &[usize], point: usize) -> Complex64 {
        self.data[comp_index(self.n(), idx) * self.num_points() + point]
    }

    /// All components at one grid point, in component order.
    pub fn point_values(&self, point: usize) -> Vec<Complex64> {
        let np = self.num_points();
        (0..self.num_components())
            .map(|c| self.data[c * np + point])
            .collect()
    }

    pub fn same_grid(&self, other: &TensorField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_grid(&self, other: &TensorField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(HcfError::GridMismatch)
        }
    }

    pub fn check_signature(&self, expected: &[Slot]) -> Result<()> {
        if self.signature == expected {
            Ok(())
        } else {
            Err(HcfError::SignatureMismatch(format!(
                "expected {:?}, found {:?}",
                expected, self.signature
            )))
        }
    }

    /// Complex conjugate: conjugates the data and flips the holomorphy of every slot.
    pub fn conj(&self) -> TensorField {
        TensorField {
            grid: Arc::clone(&self.grid),
            signature: self.signature.iter().map(|s| s.conj()).collect(),
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Reorders slots: output slot `s` is input slot `perm[s]`.
    pub fn permute(&self, perm: &[usize]) -> Result<TensorField> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(HcfError::InvalidInput(format!("invalid permutation {perm:?}")));
        }
        let n = self.n();
        let sig: Vec<Slot> = perm.iter().map(|&p| self.signature[p]).collect();
        let mut out = TensorField::zeros(&self.grid, &sig);
        let mut src = vec![0; r];
        for c in 0..self.num_components() {
            let idx = comp_multi_index(n, r, c);
            for s in 0..r {
                src[perm[s]] = idx[s];
            }
            let from = comp_index(n, &src);
            out.comp_mut(c).copy_from_slice(self.comp(from));
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.check_grid(other)?;
        other.check_signature(&self.signature)?;
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o -= v;
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &TensorField) -> Result<()> {
        self.check_grid(other)?;
        other.check_signature(&self.signature)?;
        for (o, v) in self.data.iter_mut().zip(&other.data) {
            *o += v;
        }
        Ok(())
    }

    pub fn scale(&self, s: Complex64) -> TensorField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn mean_abs(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.norm()).sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Componentwise `∂_a` (no new slot).
    pub fn partial_holo(&self, a: usize) -> Result<TensorField> {
        self.grid.check_axis(a)?;
        let mut out = TensorField::zeros(&self.grid, &self.signature);
        let np = self.num_points();
        for c in 0..self.num_components() {
            self.grid
                .d_holo(&self.data[c * np..(c + 1) * np], a, &mut out.data[c * np..(c + 1) * np]);
        }
        Ok(out)
    }

    /// Componentwise `∂_ā` (no new slot).
    pub fn partial_anti(&self, a: usize) -> Result<TensorField> {
        self.grid.check_axis(a)?;
        let mut out = TensorField::zeros(&self.grid, &self.signature);
        let np = self.num_points();
        for c in 0..self.num_components() {
            self.grid
                .d_anti(&self.data[c * np..(c + 1) * np], a, &mut out.data[c * np..(c + 1) * np]);
        }
        Ok(out)
    }

    /// Largest `|t − other|` over points and components.
    pub fn max_diff(&self, other: &TensorField) -> Result<f64> {
        self.check_grid(other)?;
        other.check_signature(&self.signature)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// Hermitian positive-definite `g_{ij̄}`; the flow variable.
#[derive(Debug, Clone)]
pub struct MetricField {
    g: TensorField,
}

pub const METRIC_SIGNATURE: [Slot; 2] = [Slot::LOWER_HOLO, Slot::LOWER_ANTI];

/// Relative Hermitian defect accepted at construction.
const HERMITIAN_TOL: f64 = 1e-10;

impl MetricField {
    /// Validates Hermitian symmetry and positive definiteness at every point.
    pub fn new(g: TensorField) -> Result<Self> {
        g.check_signature(&METRIC_SIGNATURE)?;
        let metric = Self { g };
        metric.validate()?;
        Ok(metric)
    }

    /// Flat metric `δ_{ij}`.
    pub fn flat(grid: &Arc<TorusGrid>) -> Self {
        let n = grid.n();
        let mut g = TensorField::zeros(grid, &METRIC_SIGNATURE);
        for i in 0..n {
            g.comp_mut(comp_index(n, &[i, i]))
                .iter_mut()
                .for_each(|v| *v = Complex64::new(1.0, 0.0));
        }
        Self { g }
    }

    pub fn validate(&self) -> Result<()> {
        let np = self.g.num_points();
        for p in 0..np {
            let m = self.matrix_at(p);
            let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
            let defect = linalg::hermitian_defect(&m);
            if !(defect <= HERMITIAN_TOL * scale) {
                return Err(HcfError::NonHermitian { point: p, defect });
            }
            if crate::linalg::cholesky_lower(&m).is_none() {
                return Err(HcfError::SingularMetric {
                    point: p,
                    min_eigenvalue: linalg::min_hermitian_eigenvalue(&m),
                });
            }
        }
        Ok(())
    }

    pub fn field(&self) -> &TensorField {
        &self.g
    }

    pub fn into_field(self) -> TensorField {
        self.g
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.g.grid()
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// `G[i][j] = g_{ij̄}` at a grid point.
    pub fn matrix_at(&self, point: usize) -> DMatrix<Complex64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.g.get(&[i, j], point))
    }

    /// Averages each point with its conjugate transpose.
    pub fn symmetrize(&mut self) {
        let n = self.n();
        let np = self.g.num_points();
        for i in 0..n {
            for j in i..n {
                let cij = comp_index(n, &[i, j]);
                let cji = comp_index(n, &[j, i]);
                for p in 0..np {
                    let a = self.g.data[cij * np + p];
                    let b = self.g.data[cji * np + p];
                    let avg = (a + b.conj()) * 0.5;
                    self.g.data[cij * np + p] = avg;
                    self.g.data[cji * np + p] = avg.conj();
                }
            }
        }
    }

    pub fn hermitian_drift(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.g.comp_at(&[i, j]);
                let b = self.g.comp_at(&[j, i]);
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y.conj()).norm());
                }
            }
        }
        worst
    }

    /// Builds without validation; callers guarantee the invariants.
    pub(crate) fn from_field_unchecked(g: TensorField) -> Self {
        Self { g }
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(HcfError::InvalidInput("metric scale must be positive".into()));
        }
        Ok(Self {
            g: self.g.scale(Complex64::new(lambda, 0.0)),
        })
    }
}
