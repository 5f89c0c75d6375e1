//! Periodic discretization of `ℂⁿ/Λ` with a rectangular lattice.
//!
//! Real coordinates are ordered `(x¹, y¹, x², y², …)` with `z^a = x^a + i y^a`;
//! real axis `2a` is `x^a` and `2a + 1` is `y^a`. Grid points are stored
//! row-major with the last real axis varying fastest:
//! `index = Σ_α i_α · N^(2n−1−α)`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{HcfError, Result};

pub const MAX_COMPLEX_DIM: usize = 3;
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    #[default]
    Spectral,
    /// Fourth-order central differences.
    CentralDifference4,
}

/// Serializable description of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub resolution: usize,
    pub periods: Vec<f64>,
    pub mode: DerivativeMode,
}

impl GridSpec {
    pub fn new(n: usize, resolution: usize, mode: DerivativeMode) -> Self {
        Self {
            n,
            resolution,
            periods: vec![TAU; 2 * n],
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_COMPLEX_DIM {
            return Err(HcfError::InvalidGrid(format!(
                "complex dimension must be in 1..={MAX_COMPLEX_DIM}, got {}",
                self.n
            )));
        }
        if self.resolution < MIN_RESOLUTION || !self.resolution.is_power_of_two() {
            return Err(HcfError::InvalidGrid(format!(
                "resolution must be a power of two and at least {MIN_RESOLUTION}, got {}",
                self.resolution
            )));
        }
        if self.periods.len() != 2 * self.n {
            return Err(HcfError::InvalidGrid(format!(
                "expected {} periods, got {}",
                2 * self.n,
                self.periods.len()
            )));
        }
        if self.periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(HcfError::InvalidGrid("periods must be positive".into()));
        }
        Ok(())
    }
}

pub struct TorusGrid {
    spec: GridSpec,
    num_points: usize,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl TorusGrid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(spec.resolution);
        let fft_inverse = planner.plan_fft_inverse(spec.resolution);
        let num_points = spec.resolution.pow(2 * spec.n as u32);
        Ok(Arc::new(Self {
            spec,
            num_points,
            fft_forward,
            fft_inverse,
        }))
    }

    /// Grid with `2π` periods on every axis.
    pub fn periodic(n: usize, resolution: usize, mode: DerivativeMode) -> Result<Arc<Self>> {
        Self::new(GridSpec::new(n, resolution, mode))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn real_dims(&self) -> usize {
        2 * self.spec.n
    }

    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn periods(&self) -> &[f64] {
        &self.spec.periods
    }

    pub fn mode(&self) -> DerivativeMode {
        self.spec.mode
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spec.periods[axis] / self.spec.resolution as f64
    }

    /// Same geometry with a different derivative mode.
    pub fn with_mode(&self, mode: DerivativeMode) -> Arc<Self> {
        let mut spec = self.spec.clone();
        spec.mode = mode;
        Self::new(spec).expect("spec already validated")
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.spec
            .resolution
            .pow((self.real_dims() - 1 - axis) as u32)
    }

    pub fn multi_index(&self, point: usize) -> Vec<usize> {
        let res = self.spec.resolution;
        let dims = self.real_dims();
        let mut idx = vec![0; dims];
        let mut p = point;
        for a in (0..dims).rev() {
            idx[a] = p % res;
            p /= res;
        }
        idx
    }

    pub fn coordinates(&self, point: usize) -> Vec<f64> {
        self.multi_index(point)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.spacing(a))
            .collect()
    }

    /// Flat index of the point shifted by `offset` cells along `axis` (periodic).
    pub fn shifted(&self, point: usize, axis: usize, offset: isize) -> usize {
        let res = self.spec.resolution as isize;
        let stride = self.stride(axis);
        let i = ((point / stride) % self.spec.resolution) as isize;
        let j = (i + offset).rem_euclid(res) as usize;
        point - (i as usize) * stride + j * stride
    }

    /// Samples a function of the real coordinates.
    pub fn sample<F>(&self, f: F) -> Vec<Complex64>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        (0..self.num_points)
            .map(|p| f(&self.coordinates(p)))
            .collect()
    }

    pub(crate) fn check_axis(&self, a: usize) -> Result<()> {
        if a >= self.spec.n {
            return Err(HcfError::AxisOutOfRange {
                axis: a,
                n: self.spec.n,
            });
        }
        Ok(())
    }

    /// Derivative of a scalar grid field along real axis `axis`.
    pub fn d_real(&self, field: &[Complex64], axis: usize, out: &mut [Complex64]) {
        debug_assert_eq!(field.len(), self.num_points);
        debug_assert_eq!(out.len(), self.num_points);
        match self.spec.mode {
            DerivativeMode::Spectral => self.d_real_spectral(field, axis, out),
            DerivativeMode::CentralDifference4 => self.d_real_fd4(field, axis, out),
        }
    }

    fn d_real_spectral(&self, field: &[Complex64], axis: usize, out: &mut [Complex64]) {
        let res = self.spec.resolution;
        let stride = self.stride(axis);
        let lines = self.num_points / res;
        let scale = TAU / self.spec.periods[axis];
        let nyquist = res / 2;
        // i·k multipliers in FFT order, Nyquist dropped so the operator maps
        // real fields to real fields; the 1/N normalization is folded in.
        let mult: Vec<Complex64> = (0..res)
            .map(|j| {
                if j == nyquist {
                    Complex64::new(0.0, 0.0)
                } else {
                    let k = if j < nyquist { j as f64 } else { j as f64 - res as f64 };
                    Complex64::new(0.0, k * scale / res as f64)
                }
            })
            .collect();

        const BATCH_LINES: usize = 2048;
        let mut buf = vec![Complex64::new(0.0, 0.0); BATCH_LINES.min(lines) * res];
        let scratch_len = self
            .fft_forward
            .get_inplace_scratch_len()
            .max(self.fft_inverse.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        let line_base = |l: usize| (l / stride) * res * stride + l % stride;

        let mut first = 0;
        while first < lines {
            let count = BATCH_LINES.min(lines - first);
            let chunk = &mut buf[..count * res];
            for b in 0..count {
                let base = line_base(first + b);
                for j in 0..res {
                    chunk[b * res + j] = field[base + j * stride];
                }
            }
            self.fft_forward.process_with_scratch(chunk, &mut scratch);
            for line in chunk.chunks_exact_mut(res) {
                for (v, m) in line.iter_mut().zip(&mult) {
                    *v *= m;
                }
            }
            self.fft_inverse.process_with_scratch(chunk, &mut scratch);
            for b in 0..count {
                let base = line_base(first + b);
                for j in 0..res {
                    out[base + j * stride] = chunk[b * res + j];
                }
            }
            first += count;
        }
    }

    fn d_real_fd4(&self, field: &[Complex64], axis: usize, out: &mut [Complex64]) {
        let res = self.spec.resolution;
        let stride = self.stride(axis);
        let h = self.spacing(axis);
        let c1 = 8.0 / (12.0 * h);
        let c2 = 1.0 / (12.0 * h);
        for (p, o) in out.iter_mut().enumerate() {
            let i = (p / stride) % res;
            let base = p - i * stride;
            let at = |off: isize| field[base + ((i as isize + off).rem_euclid(res as isize) as usize) * stride];
            *o = (at(1) - at(-1)) * c1 - (at(2) - at(-2)) * c2;
        }
    }

    /// `∂_a f = ½(∂_{x^a} − i ∂_{y^a}) f` for a scalar field.
    pub fn d_holo(&self, field: &[Complex64], a: usize, out: &mut [Complex64]) {
        self.wirtinger(field, a, -1.0, out);
    }

    /// `∂_ā f = ½(∂_{x^a} + i ∂_{y^a}) f` for a scalar field.
    pub fn d_anti(&self, field: &[Complex64], a: usize, out: &mut [Complex64]) {
        self.wirtinger(field, a, 1.0, out);
    }

    fn wirtinger(&self, field: &[Complex64], a: usize, sign: f64, out: &mut [Complex64]) {
        let mut dy = vec![Complex64::new(0.0, 0.0); self.num_points];
        self.d_real(field, 2 * a, out);
        self.d_real(field, 2 * a + 1, &mut dy);
        let iy = Complex64::new(0.0, sign);
        for (o, y) in out.iter_mut().zip(&dy) {
            *o = (*o + iy * y) * 0.5;
        }
    }

    /// Largest eigenvalue magnitude of the discrete operator `∂_x²` on one axis.
    pub fn second_derivative_bound(&self, axis: usize) -> f64 {
        let h = self.spacing(axis);
        match self.spec.mode {
            DerivativeMode::Spectral => {
                let kmax = (self.spec.resolution / 2 - 1) as f64 * TAU / self.spec.periods[axis];
                kmax * kmax
            }
            // squared first-derivative symbol of the 4th-order stencil, bounded
            DerivativeMode::CentralDifference4 => {
                let s = (0..self.spec.resolution)
                    .map(|j| {
                        let th = TAU * j as f64 / self.spec.resolution as f64;
                        ((8.0 * th.sin() - (2.0 * th).sin()) / (6.0 * h)).abs()
                    })
                    .fold(0.0, f64::max);
                s * s
            }
        }
    }
}
