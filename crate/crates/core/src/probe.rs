//! Grid-refinement study of the derivative kernels against symbolic derivatives.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HcfError, Result};
use crate::grid::{DerivativeMode, TorusGrid};
use crate::presets::seeded_real_mix;
use crate::symbolic::TrigPoly;

pub const DEFAULT_RESOLUTIONS: [usize; 3] = [16, 32, 64];

/// A field to differentiate. Only symbolic fields carry a reference derivative.
pub enum ProbeField {
    Symbolic(TrigPoly),
    Opaque(PointFn),
}

pub type PointFn = Box<dyn Fn(&[f64]) -> Complex64>;

impl fmt::Debug for ProbeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeField::Symbolic(p) => f.debug_tuple("Symbolic").field(p).finish(),
            ProbeField::Opaque(_) => f.write_str("Opaque"),
        }
    }
}

impl ProbeField {
    /// Built-in probe fields by name: `zero`, `sin_cos` (`sin x¹ cos y¹`), `band_limited`.
    pub fn named(name: &str, n: usize, seed: u64) -> Result<Self> {
        let periods = vec![TAU; 2 * n];
        let poly = match name {
            "zero" => TrigPoly::zero(&periods),
            "sin_cos" => TrigPoly::sin(&periods, 0, 1, 1.0, 0.0).mul(&TrigPoly::cos(&periods, 1, 1, 1.0, 0.0)),
            "band_limited" => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                seeded_real_mix(&periods, 1.0, 5, &mut rng)
            }
            other => {
                return Err(HcfError::InvalidInput(format!(
                    "unknown probe field '{other}' (expected zero, sin_cos or band_limited)"
                )))
            }
        };
        Ok(ProbeField::Symbolic(poly))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub mode: DerivativeMode,
    pub resolution: usize,
    /// Max-norm error over all points and all `∂_a`, `∂_ā`.
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeTable {
    pub n: usize,
    pub rows: Vec<ProbeRow>,
}

impl ProbeTable {
    /// `log2(e_coarse / e_fine)` between consecutive resolutions of one mode.
    pub fn observed_orders(&self, mode: DerivativeMode) -> Vec<f64> {
        let rows: Vec<&ProbeRow> = self.rows.iter().filter(|r| r.mode == mode).collect();
        rows.windows(2)
            .map(|w| (w[0].max_error / w[1].max_error).log2() / (w[1].resolution as f64 / w[0].resolution as f64).log2())
            .collect()
    }

    pub fn error(&self, mode: DerivativeMode, resolution: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.mode == mode && r.resolution == resolution)
            .map(|r| r.max_error)
    }
}

pub fn convergence_probe(
    field: &ProbeField,
    n: usize,
    resolutions: &[usize],
    modes: &[DerivativeMode],
) -> Result<ProbeTable> {
    let poly = match field {
        ProbeField::Symbolic(p) => p,
        ProbeField::Opaque(_) => return Err(HcfError::MissingSymbolicDerivative),
    };
    if poly.dims() != 2 * n {
        return Err(HcfError::InvalidInput(format!(
            "probe field has {} real dimensions, grid needs {}",
            poly.dims(),
            2 * n
        )));
    }
    let mut rows = Vec::new();
    for &mode in modes {
        for &res in resolutions {
            let grid = TorusGrid::periodic(n, res, mode)?;
            let f = poly.sample(&grid);
            let mut out = vec![Complex64::new(0.0, 0.0); grid.num_points()];
            let mut worst: f64 = 0.0;
            for a in 0..n {
                for (holo, exact) in [(true, poly.d_holo(a)), (false, poly.d_anti(a))] {
                    if holo {
                        grid.d_holo(&f, a, &mut out);
                    } else {
                        grid.d_anti(&f, a, &mut out);
                    }
                    let expect = exact.sample(&grid);
                    for (o, e) in out.iter().zip(&expect) {
                        worst = worst.max((o - e).norm());
                    }
                }
            }
            rows.push(ProbeRow {
                mode,
                resolution: res,
                max_error: worst,
            });
        }
    }
    Ok(ProbeTable { n, rows })
}
