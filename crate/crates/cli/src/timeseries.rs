//! Versioned time-series CSV.
//!
//! The first line is `# hcf-timeseries v<version> config_hash=<hex> seed=<u64>`;
//! the second is the column header. Empty cells mean the monitor was off.

use std::io::{BufRead, BufReader, Read, Write};

use hcf_core::flow::StepRecord;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "# hcf-timeseries";

pub const COLUMNS_V1: [&str; 13] = [
    "step",
    "t",
    "dt",
    "sup_rm",
    "sup_t_sq",
    "sup_grad_t",
    "f_sup",
    "k_now",
    "max_ricci_eig",
    "griffiths_kappa",
    "pinch_margin",
    "min_phi",
    "max_eig_a",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        Self {
            version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            seed,
        }
    }

    fn line(&self) -> String {
        format!("{MAGIC} v{} config_hash={} seed={}", self.version, self.config_hash, self.seed)
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = || CliError::Io(format!("not an hcf time series header: '{line}'"));
        let rest = line.trim_end().strip_prefix(MAGIC).ok_or_else(bad)?;
        let mut parts = rest.split_whitespace();
        let version: u32 = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad)?;
        let mut config_hash = None;
        let mut seed = None;
        for p in parts {
            match p.split_once('=') {
                Some(("config_hash", v)) => config_hash = Some(v.to_string()),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => {}
            }
        }
        Ok(Self {
            version,
            config_hash: config_hash.ok_or_else(bad)?,
            seed: seed.ok_or_else(bad)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub sup_rm: f64,
    pub sup_t_sq: f64,
    pub sup_grad_t: f64,
    pub f_sup: f64,
    pub k_now: f64,
    pub max_ricci_eig: Option<f64>,
    pub griffiths_kappa: Option<f64>,
    pub pinch_margin: Option<f64>,
    pub min_phi: Option<f64>,
    pub max_eig_a: Option<f64>,
}

impl From<&StepRecord> for Row {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            t: r.t,
            dt: r.dt,
            sup_rm: r.sup_rm,
            sup_t_sq: r.sup_torsion_sq,
            sup_grad_t: r.sup_grad_torsion,
            f_sup: r.f_sup,
            k_now: r.k_now,
            max_ricci_eig: r.max_ricci_eigenvalue,
            griffiths_kappa: r.griffiths_kappa,
            pinch_margin: r.pinch_margin,
            min_phi: r.min_phi,
            max_eig_a: r.max_eig_a,
        }
    }
}

pub struct Writer<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> Writer<W> {
    pub fn new(mut w: W, header: &Header) -> Result<Self> {
        writeln!(w, "{}", header.line())?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(COLUMNS_V1)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &Row) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads a time series of any version up to [`SCHEMA_VERSION`].
pub fn read(r: impl Read) -> Result<(Header, Vec<Row>)> {
    let mut r = BufReader::new(r);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let header = Header::parse(&first)?;
    if header.version > SCHEMA_VERSION {
        return Err(CliError::Io(format!(
            "time series version {} is newer than supported {SCHEMA_VERSION}",
            header.version
        )));
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    if columns != COLUMNS_V1 {
        return Err(CliError::Io(format!("unexpected time series columns {columns:?}")));
    }
    let rows = csv.deserialize().collect::<std::result::Result<Vec<Row>, _>>()?;
    Ok((header, rows))
}

pub fn read_path(path: &std::path::Path) -> Result<(Header, Vec<Row>)> {
    read(std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?)
}
