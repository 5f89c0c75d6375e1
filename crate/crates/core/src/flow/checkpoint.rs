//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `HCFCKPT1`, a little-endian `u64` header length,
//! the JSON header, then raw little-endian `f64` data: the metric as
//! `points × n × n` complex values (point-major, points row-major over the
//! real axes `(x¹, y¹, …)` with the last axis fastest, entry `[i][j] = g_{ij̄}`,
//! each value stored as `re, im`), followed by the heat field (`points` reals)
//! when present.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcfError, Result};
use crate::grid::{GridSpec, TorusGrid};
use crate::tensor::{MetricField, TensorField, METRIC_SIGNATURE};

use super::heat::HeatState;
use super::FlowState;

pub const MAGIC: &[u8; 8] = b"HCFCKPT1";
pub const FORMAT_VERSION: u32 = 1;
const LAYOUT: &str = "metric: points x n x n complex (re, im) f64 LE, point-major, real axes (x1, y1, x2, y2, ...) row-major with the last axis fastest, entry [i][j] = g_{i jbar}; then heat field: points f64 LE if has_heat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub layout: String,
    pub grid: GridSpec,
    pub t: f64,
    pub step: u64,
    pub seed: u64,
    pub config_hash: String,
    /// Full configuration text the run was started with.
    pub config: String,
    /// `sup(|Rm| + |T|² + |∇T|)` of the initial metric of the run.
    pub k0: f64,
    pub has_heat: bool,
    /// Whether the strong-maximum-principle monitor runs in assertion mode.
    pub smp_assertion: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub metric: MetricField,
    pub heat: Option<HeatState>,
}

impl Checkpoint {
    pub fn new(
        state: &FlowState,
        heat: Option<&HeatState>,
        seed: u64,
        config_hash: &str,
        config: &str,
        k0: f64,
        smp_assertion: Option<bool>,
    ) -> Self {
        Self {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                layout: LAYOUT.to_string(),
                grid: state.g.grid().spec().clone(),
                t: state.t,
                step: state.step,
                seed,
                config_hash: config_hash.to_string(),
                config: config.to_string(),
                k0,
                has_heat: heat.is_some(),
                smp_assertion,
            },
            metric: state.g.clone(),
            heat: heat.cloned(),
        }
    }

    pub fn state(&self) -> FlowState {
        FlowState::at(self.metric.clone(), self.header.t, self.header.step)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.header).map_err(|e| HcfError::Checkpoint(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let g = self.metric.field();
        let n = g.n();
        let np = g.num_points();
        let mut buf = Vec::with_capacity(np * n * n * 16);
        for p in 0..np {
            for c in 0..n * n {
                let v = g.comp(c)[p];
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        if let Some(h) = &self.heat {
            for v in &h.phi {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| HcfError::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated before magic"))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 26 {
            return Err(bad("header length implausible"));
        }
        let mut header = vec![0u8; len];
        r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&header).map_err(|e| HcfError::Checkpoint(format!("corrupt header: {e}")))?;
        if header.format_version > FORMAT_VERSION {
            return Err(HcfError::Checkpoint(format!(
                "format version {} is newer than supported {FORMAT_VERSION}",
                header.format_version
            )));
        }
        let grid: Arc<TorusGrid> = TorusGrid::new(header.grid.clone()).map_err(|e| HcfError::Checkpoint(e.to_string()))?;
        let n = grid.n();
        let np = grid.num_points();
        let expect = np * n * n * 16 + if header.has_heat { np * 8 } else { 0 };
        let mut data = Vec::with_capacity(expect);
        r.read_to_end(&mut data)?;
        if data.len() != expect {
            return Err(HcfError::Checkpoint(format!(
                "data section has {} bytes, expected {expect}",
                data.len()
            )));
        }
        let f = |off: usize| f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        let mut values = vec![Complex64::new(0.0, 0.0); np * n * n];
        for p in 0..np {
            for c in 0..n * n {
                let off = (p * n * n + c) * 16;
                values[c * np + p] = Complex64::new(f(off), f(off + 8));
            }
        }
        let metric = MetricField::new(TensorField::from_data(&grid, &METRIC_SIGNATURE, values)?)
            .map_err(|e| HcfError::Checkpoint(format!("stored metric invalid: {e}")))?;
        let heat = header.has_heat.then(|| {
            let base = np * n * n * 16;
            HeatState {
                t: header.t,
                phi: (0..np).map(|p| f(base + p * 8)).collect(),
            }
        });
        Ok(Self { header, metric, heat })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
