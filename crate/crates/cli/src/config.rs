//! Run configuration: TOML with sections `[preset]`, `[grid]`, `[flow]`,
//! `[monitors]`, `[check]` and `[output]`.

use std::path::{Path, PathBuf};

use hcf_core::conditions::{ConditionSettings, GriffithsSettings};
use hcf_core::flow::{HeatScheme, StepController};
use hcf_core::presets::{Preset, PresetKind, PresetParams};
use hcf_core::grid::MAX_COMPLEX_DIM;
use hcf_core::{DerivativeMode, GridSpec, MetricField, TorusGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Environment variable that replaces `output.dir`.
pub const OUTPUT_ROOT_ENV: &str = "HCF_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: PresetSection,
    pub grid: GridSection,
    pub flow: FlowSection,
    pub monitors: MonitorSection,
    pub check: CheckSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PresetSection {
    pub name: PresetKind,
    pub amplitude: f64,
    pub modes: usize,
    /// Run seed: drives the preset and every sampled monitor. At most
    /// `i64::MAX`, the largest TOML integer.
    pub seed: u64,
}

impl Default for PresetSection {
    fn default() -> Self {
        let p = PresetParams::default();
        Self {
            name: PresetKind::Flat,
            amplitude: p.amplitude,
            modes: p.modes,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub resolution: usize,
    pub mode: DerivativeMode,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 2,
            resolution: 16,
            mode: DerivativeMode::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    /// End time. Exactly one of `t_end` and `t_end_k0` is required by `run`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// End time in units of `1/K₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end_k0: Option<f64>,
    pub c1: f64,
    pub safety: f64,
    pub max_dt: f64,
    pub min_dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    /// Checkpoint every this many steps; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let c = StepController::default();
        Self {
            t_end: None,
            t_end_k0: None,
            c1: c.c1,
            safety: c.safety,
            max_dt: c.max_dt,
            min_dt: c.min_dt,
            max_steps: None,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSection {
    /// Griffiths, Ricci and pinching analysis at every step.
    pub conditions: bool,
    pub epsilon: f64,
    /// `K` of the `(1 + Kt)` pinching factor.
    pub pinch_k: f64,
    pub griffiths_points: usize,
    pub griffiths_restarts: usize,
    pub griffiths_max_iterations: usize,
    pub pinch_points: usize,
    pub pinch_samples: usize,
    /// Heat companion with the strong-maximum-principle monitor.
    pub heat: bool,
    /// `k` of `Aᵉ = e^{−kt}(…)`.
    pub heat_k: f64,
    /// `B` of `Aᵉ`.
    pub heat_b: f64,
    pub heat_scheme: HeatScheme,
    pub bump_radius: f64,
    pub bump_height: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        let c = ConditionSettings::default();
        Self {
            conditions: true,
            epsilon: c.epsilon,
            pinch_k: c.pinch_k,
            griffiths_points: c.griffiths_points,
            griffiths_restarts: c.griffiths.restarts,
            griffiths_max_iterations: c.griffiths.max_iterations,
            pinch_points: c.pinch_points,
            pinch_samples: c.pinch_samples,
            heat: false,
            heat_k: 1.0,
            heat_b: 1.0,
            heat_scheme: HeatScheme::default(),
            bump_radius: 1.5,
            bump_height: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub identity_tolerance: f64,
    /// Time at which the evolution equations are compared.
    pub t_star: f64,
    pub deltas: Vec<f64>,
    /// Fixed integrator steps per smallest `δ`.
    pub substeps: usize,
    /// Band the measured `δ` orders must fall in.
    pub min_order: f64,
    pub max_order: f64,
    /// Residuals below this are treated as exact (no order is measurable).
    pub exact_floor: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            identity_tolerance: 1e-7,
            t_star: 1e-3,
            deltas: vec![1e-3, 5e-4, 2.5e-4],
            substeps: 1,
            min_order: 1.8,
            max_order: 2.2,
            exact_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: bool,
    pub summary: bool,
    pub checkpoints: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("hcf-out"),
            csv: true,
            summary: true,
            checkpoints: true,
        }
    }
}

/// 1-based line of `key` inside `[section]`, for error messages.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(rest) = l.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
        } else if current == section {
            let name = l.split('=').next().unwrap_or("").trim();
            if name == key {
                return Some(i + 1);
            }
        }
    }
    None
}

/// Parses `section.key=value`; the value is read as a TOML value, or as a
/// string if it is not one.
fn parse_override(s: &str) -> Result<(String, String, toml::Value)> {
    let (path, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{s}' is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Config(format!("override key '{path}' is not of the form section.key")))?;
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((section.to_string(), key.to_string(), parsed))
}

impl RunConfig {
    /// Parses and validates configuration text, applying `section.key=value`
    /// overrides on top.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: RunConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
            for o in overrides {
                let (section, key, value) = parse_override(o)?;
                let entry = table
                    .entry(section.clone())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                let toml::Value::Table(t) = entry else {
                    return Err(CliError::Config(format!("'{section}' is not a section")));
                };
                t.insert(key, value);
            }
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("{e} (after overrides)")))?
        };
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, text: &str) -> Result<()> {
        let at = |section: &str, key: &str, msg: String| {
            let loc = line_of(text, section, key).map_or_else(String::new, |l| format!(" (line {l})"));
            CliError::Config(format!("{section}.{key}{loc}: {msg}"))
        };
        if let Err(e) = self.grid_spec().validate() {
            let key = if self.grid.n == 0 || self.grid.n > MAX_COMPLEX_DIM { "n" } else { "resolution" };
            return Err(at("grid", key, e.to_string()));
        }
        let p = &self.preset;
        if !p.amplitude.is_finite() {
            return Err(at("preset", "amplitude", "must be finite".into()));
        }
        if p.seed > i64::MAX as u64 {
            return Err(at("preset", "seed", "must fit in a TOML integer".into()));
        }
        if let Err(e) = self.controller().validate() {
            return Err(at("flow", "safety", e.to_string()));
        }
        for (key, v) in [("t_end", self.flow.t_end), ("t_end_k0", self.flow.t_end_k0)] {
            if v.is_some_and(|v| !(v.is_finite() && v >= 0.0)) {
                return Err(at("flow", key, "must be a nonnegative number".into()));
            }
        }
        if self.flow.t_end.is_some() && self.flow.t_end_k0.is_some() {
            return Err(at("flow", "t_end_k0", "give either t_end or t_end_k0, not both".into()));
        }
        let m = &self.monitors;
        if !(m.epsilon >= 0.0) {
            return Err(at("monitors", "epsilon", "must be nonnegative".into()));
        }
        if m.heat && !(m.bump_radius > 0.0 && m.bump_height > 0.0) {
            return Err(at("monitors", "bump_radius", "bump radius and height must be positive".into()));
        }
        let c = &self.check;
        if c.deltas.len() < 2 || c.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(at("check", "deltas", "need at least two positive deltas to measure an order".into()));
        }
        if c.substeps == 0 {
            return Err(at("check", "substeps", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid.n, self.grid.resolution, self.grid.mode)
    }

    pub fn controller(&self) -> StepController {
        StepController {
            c1: self.flow.c1,
            safety: self.flow.safety,
            max_dt: self.flow.max_dt,
            min_dt: self.flow.min_dt,
        }
    }

    pub fn condition_settings(&self) -> ConditionSettings {
        let m = &self.monitors;
        ConditionSettings {
            epsilon: m.epsilon,
            pinch_k: m.pinch_k,
            griffiths_points: m.griffiths_points,
            pinch_points: m.pinch_points,
            pinch_samples: m.pinch_samples,
            griffiths: GriffithsSettings {
                restarts: m.griffiths_restarts,
                max_iterations: m.griffiths_max_iterations,
                ..GriffithsSettings::default()
            },
            seed: self.preset.seed,
        }
    }

    pub fn preset(&self) -> Result<Preset> {
        let p = &self.preset;
        Ok(Preset::new(
            p.name,
            self.grid.n,
            PresetParams {
                amplitude: p.amplitude,
                modes: p.modes,
                seed: p.seed,
            },
        )?)
    }

    pub fn initial_metric(&self) -> Result<(std::sync::Arc<TorusGrid>, MetricField)> {
        let grid = TorusGrid::new(self.grid_spec())?;
        let g = self.preset()?.sample(&grid)?;
        Ok((grid, g))
    }

    /// SHA-256 over the canonical JSON form of everything that determines the
    /// trajectory: all of `[preset]`, `[grid]` and `[monitors]`, and `[flow]`
    /// without its stopping and checkpoint fields. `[check]` and `[output]` are
    /// excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("object");
        obj.remove("check");
        obj.remove("output");
        if let Some(flow) = obj.get_mut("flow").and_then(|f| f.as_object_mut()) {
            for k in ["t_end", "t_end_k0", "max_steps", "checkpoint_every"] {
                flow.remove(k);
            }
        }
        let canonical = serde_json::to_string(&v).expect("json");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `--output` flag, then `HCF_OUTPUT_ROOT`, then `output.dir`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root),
            _ => self.output.dir.clone(),
        }
    }
}
