use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hcf_core::chern::{tensor_norms, ChernPackage};
use hcf_core::conditions::{analyze, classify, minus_b_field, ConditionSummary, CurvatureReport};
use hcf_core::flow::{
    bump, run_flow, start_heat, Checkpoint, DoublingReport, FlowObserver, FlowSettings, FlowState, HeatSettings,
    HeatState, SmpMonitor, StepRecord,
};
use hcf_core::presets::PresetKind;
use hcf_core::probe::{convergence_probe, ProbeField, ProbeTable};
use hcf_core::verify::{delta_study, identity_suite, DeltaStudy, EvolutionResidual, IdentityReport};
use hcf_core::{DerivativeMode, HcfError};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{exit, CliError, Result};
use crate::timeseries::{self, Header, Row};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
    NumericalAbort,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => exit::SUCCESS,
            Outcome::CheckFailed => exit::CHECK_FAILED,
            Outcome::NumericalAbort => exit::NUMERICAL,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn io_err(e: CliError) -> HcfError {
    HcfError::Io(std::io::Error::other(e.to_string()))
}

pub fn abort_kind(e: &HcfError) -> &'static str {
    match e {
        HcfError::PositivityLoss { .. } | HcfError::SingularMetric { .. } | HcfError::NonPositiveDeterminant { .. } => {
            "positivity_loss"
        }
        HcfError::NonFinite { .. } => "non_finite",
        HcfError::StepUnderflow { .. } => "step_underflow",
        HcfError::HeatPositivity { .. } => "heat_positivity",
        HcfError::NotMonotone { .. } => "heat_not_monotone",
        _ => "other",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbortInfo {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmpSummary {
    pub assertion_mode: bool,
    pub k: f64,
    pub b: f64,
    pub epsilon: f64,
    /// Largest `max eig Aᵉ` seen.
    pub max_value: f64,
    /// First `(t, max eig Aᵉ)` above zero in assertion mode.
    pub violation: Option<(f64, f64)>,
}

impl SmpSummary {
    fn of(m: &SmpMonitor) -> Self {
        Self {
            assertion_mode: m.assertion_mode,
            k: m.k,
            b: m.b,
            epsilon: m.epsilon,
            max_value: m.series.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max),
            violation: m.violation,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub format: &'static str,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub preset: PresetKind,
    pub n: usize,
    pub resolution: usize,
    pub mode: DerivativeMode,
    pub resumed_from: Option<PathBuf>,
    pub start_step: u64,
    pub t_start: f64,
    pub t_end: f64,
    pub final_step: u64,
    pub final_t: f64,
    pub completed: bool,
    pub abort: Option<AbortInfo>,
    /// `sup(|Rm| + |T|² + |∇T|)` at the start of the run.
    pub k0: f64,
    pub doubling: DoublingReport,
    /// Curvature-condition classification of the final state.
    pub conditions: Option<ConditionSummary>,
    pub final_kappa_bound: Option<f64>,
    pub smp: Option<SmpSummary>,
    pub final_min_phi: Option<f64>,
    pub timeseries: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
}

struct RunObserver {
    csv: Option<timeseries::Writer<BufWriter<File>>>,
    checkpoint_every: u64,
    checkpoint_dir: Option<PathBuf>,
    start_step: u64,
    seed: u64,
    hash: String,
    config_text: String,
    k0: f64,
    smp_assertion: Option<bool>,
    checkpoints: Vec<PathBuf>,
}

impl FlowObserver for RunObserver {
    fn on_record(&mut self, record: &StepRecord, state: &FlowState, heat: Option<&HeatState>) -> hcf_core::Result<()> {
        if let Some(w) = &mut self.csv {
            w.write(&Row::from(record)).map_err(io_err)?;
            w.flush().map_err(io_err)?;
        }
        if let Some(dir) = &self.checkpoint_dir {
            if self.checkpoint_every > 0 && record.step.is_multiple_of(self.checkpoint_every) && record.step != self.start_step {
                let path = dir.join(format!("step_{:08}.ckpt", record.step));
                Checkpoint::new(state, heat, self.seed, &self.hash, &self.config_text, self.k0, self.smp_assertion)
                    .save(&path)?;
                self.checkpoints.push(path);
            }
        }
        Ok(())
    }
}

/// How a run starts.
pub enum Start {
    Fresh,
    Resume { path: PathBuf, checkpoint: Box<Checkpoint> },
}

fn resolve_t_end(cfg: &RunConfig, k0: f64) -> Result<f64> {
    match (cfg.flow.t_end, cfg.flow.t_end_k0) {
        (Some(t), None) => Ok(t),
        (None, Some(_)) if k0 <= 0.0 => Err(CliError::Config(
            "flow.t_end_k0 needs a curved initial metric (K0 = 0); give flow.t_end".into(),
        )),
        (None, Some(s)) => Ok(s / k0),
        _ => Err(CliError::Config("flow.t_end or flow.t_end_k0 is required".into())),
    }
}

/// Runs the flow and writes the time series, checkpoints and summary into `out`.
pub fn execute_run(cfg: &RunConfig, out: &Path, start: Start) -> Result<(Outcome, RunSummary)> {
    if cfg.preset.name == PresetKind::SyntheticInjection {
        return Err(CliError::Config(
            "preset.name: synthetic_injection replaces the curvature only; it has no metric to flow (use `check conditions`)"
                .into(),
        ));
    }
    let hash = cfg.hash();
    let seed = cfg.preset.seed;
    let config_text = cfg.to_toml();
    let m = &cfg.monitors;

    let (mut state, heat, k0, resumed_from) = match start {
        Start::Fresh => {
            let (grid, g) = cfg.initial_metric()?;
            let mut state = FlowState::new(g);
            let k0 = tensor_norms(state.refresh()?)?.k_now;
            let heat = if m.heat {
                let settings = HeatSettings {
                    phi0: bump(&grid, m.bump_radius, m.bump_height),
                    k: m.heat_k,
                    b: m.heat_b,
                    epsilon: m.epsilon,
                    scheme: m.heat_scheme,
                };
                Some(start_heat(&mut state, &settings)?)
            } else {
                None
            };
            (state, heat, k0, None)
        }
        Start::Resume { path, checkpoint } => {
            let header = &checkpoint.header;
            let heat = match (&checkpoint.heat, m.heat) {
                (Some(h), true) => Some((
                    h.clone(),
                    SmpMonitor::with_mode(m.heat_k, m.heat_b, m.epsilon, header.smp_assertion.unwrap_or(false)),
                )),
                (None, true) => {
                    return Err(CliError::Config(
                        "monitors.heat is on but the checkpoint carries no heat field".into(),
                    ))
                }
                (_, false) => None,
            };
            (checkpoint.state(), heat, header.k0, Some(path))
        }
    };
    let t_end = resolve_t_end(cfg, k0)?;
    if t_end < state.t {
        return Err(CliError::Config(format!(
            "flow.t_end = {t_end} precedes the checkpoint time {}",
            state.t
        )));
    }
    let smp_assertion = heat.as_ref().map(|(_, s)| s.assertion_mode);
    let (start_step, t_start) = (state.step, state.t);

    create_dir(out)?;
    std::fs::write(out.join(CONFIG_FILE), &config_text)?;
    let csv_path = out.join(TIMESERIES_FILE);
    let csv = if cfg.output.csv {
        let ts_header = Header::new(&hash, seed);
        let kept: Vec<Row> = match (&resumed_from, csv_path.exists()) {
            (Some(_), true) => match timeseries::read_path(&csv_path) {
                Ok((h, rows)) if h.config_hash == hash => rows.into_iter().filter(|r| r.step <= start_step).collect(),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        };
        let file = File::create(&csv_path).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
        let mut w = timeseries::Writer::new(BufWriter::new(file), &ts_header)?;
        for r in &kept {
            w.write(r)?;
        }
        w.flush()?;
        Some(w)
    } else {
        None
    };
    let checkpoint_dir = if cfg.output.checkpoints && cfg.flow.checkpoint_every > 0 {
        let d = out.join(CHECKPOINT_DIR);
        create_dir(&d)?;
        Some(d)
    } else {
        None
    };
    let mut observer = RunObserver {
        csv,
        checkpoint_every: cfg.flow.checkpoint_every,
        checkpoint_dir,
        start_step,
        seed,
        hash: hash.clone(),
        config_text: config_text.clone(),
        k0,
        smp_assertion,
        checkpoints: Vec::new(),
    };
    let settings = FlowSettings {
        t_end,
        controller: cfg.controller(),
        max_steps: cfg.flow.max_steps,
        conditions: m.conditions.then(|| cfg.condition_settings()),
    };
    let outcome = run_flow(state, heat, m.heat_scheme, k0, &settings, &mut observer).map_err(|e| match e {
        HcfError::Io(io) => CliError::Io(io.to_string()),
        other => CliError::from(other),
    })?;
    if let Some(w) = &mut observer.csv {
        w.flush()?;
    }

    let final_checkpoint = if cfg.output.checkpoints {
        let path = out.join(FINAL_CHECKPOINT);
        Checkpoint::new(
            &outcome.state,
            outcome.heat.as_ref(),
            seed,
            &hash,
            &config_text,
            k0,
            smp_assertion,
        )
        .save(&path)?;
        Some(path)
    } else {
        None
    };
    state = outcome.state.clone();
    let summary = RunSummary {
        format: "hcf-run-summary",
        version: REPORT_VERSION,
        config_hash: hash,
        seed,
        preset: cfg.preset.name,
        n: cfg.grid.n,
        resolution: cfg.grid.resolution,
        mode: cfg.grid.mode,
        resumed_from,
        start_step,
        t_start,
        t_end,
        final_step: state.step,
        final_t: state.t,
        completed: outcome.completed(),
        abort: outcome.abort.as_ref().map(|e| AbortInfo {
            kind: abort_kind(e),
            message: e.to_string(),
        }),
        k0,
        doubling: outcome.doubling.report(cfg.flow.c1),
        conditions: outcome.last_report.as_ref().map(classify),
        final_kappa_bound: outcome.last_report.as_ref().and_then(|r| r.griffiths.kappa_bound),
        smp: outcome.smp.as_ref().map(SmpSummary::of),
        final_min_phi: outcome.heat.as_ref().map(|h| h.min()),
        timeseries: cfg.output.csv.then_some(csv_path),
        checkpoints: observer.checkpoints,
        final_checkpoint,
    };
    if cfg.output.summary {
        write_json(&out.join(SUMMARY_FILE), &summary)?;
    }
    let code = if outcome.completed() {
        Outcome::Success
    } else {
        Outcome::NumericalAbort
    };
    Ok((code, summary))
}

pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (outcome, s) = execute_run(cfg, out, Start::Fresh)?;
    report_run(&s, out);
    Ok(outcome)
}

/// Continues a run from a checkpoint. The configuration comes from
/// `config_text` when given, otherwise from the checkpoint header; overrides
/// apply on top. `t_end` replaces the end time and lifts any stored step
/// limit unless `flow.max_steps` is overridden too.
pub fn cmd_resume(
    checkpoint_path: &Path,
    config_text: Option<&str>,
    overrides: &[String],
    t_end: Option<f64>,
    force: bool,
    out_flag: Option<&Path>,
) -> Result<Outcome> {
    let checkpoint = Checkpoint::load(checkpoint_path).map_err(|e| match e {
        HcfError::Io(io) => CliError::Io(format!("{}: {io}", checkpoint_path.display())),
        other => CliError::Io(other.to_string()),
    })?;
    let text = config_text.unwrap_or(&checkpoint.header.config);
    let mut cfg = RunConfig::parse(text, overrides)?;
    if let Some(t) = t_end {
        cfg.flow.t_end = Some(t);
        cfg.flow.t_end_k0 = None;
        if !overrides.iter().any(|o| o.trim_start().starts_with("flow.max_steps")) {
            cfg.flow.max_steps = None;
        }
    }
    if cfg.grid_spec() != checkpoint.header.grid {
        return Err(CliError::Config(format!(
            "incompatible grid: checkpoint has n = {}, resolution = {}, mode = {:?}; config asks for n = {}, resolution = {}, mode = {:?}",
            checkpoint.header.grid.n,
            checkpoint.header.grid.resolution,
            checkpoint.header.grid.mode,
            cfg.grid.n,
            cfg.grid.resolution,
            cfg.grid.mode
        )));
    }
    let hash = cfg.hash();
    if hash != checkpoint.header.config_hash && !force {
        return Err(CliError::Config(format!(
            "config hash {hash} does not match the checkpoint's {} (use --force to continue anyway)",
            checkpoint.header.config_hash
        )));
    }
    let out = cfg.output_dir(out_flag);
    let (outcome, s) = execute_run(
        &cfg,
        &out,
        Start::Resume {
            path: checkpoint_path.to_path_buf(),
            checkpoint: Box::new(checkpoint),
        },
    )?;
    report_run(&s, &out);
    Ok(outcome)
}

fn report_run(s: &RunSummary, out: &Path) {
    match &s.abort {
        None => println!(
            "completed: step {} t = {:.6e} (K0 = {:.6e}), output in {}",
            s.final_step,
            s.final_t,
            s.k0,
            out.display()
        ),
        Some(a) => println!(
            "aborted ({}): {} at step {} t = {:.6e}, output in {}",
            a.kind,
            a.message,
            s.final_step,
            s.final_t,
            out.display()
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Identities,
    Evolution,
    Conditions,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Identities => "identities",
            CheckKind::Evolution => "evolution",
            CheckKind::Conditions => "conditions",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionVerdict {
    pub exact: bool,
    pub orders: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub summary: ConditionSummary,
    pub kappa_bound: Option<f64>,
    pub min_pinch_margin: f64,
    pub pinch_violations: Vec<(usize, String)>,
    pub griffiths_converged: bool,
    pub injected_minus_b: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CheckDetails {
    Identities(IdentityReport),
    Evolution {
        study: DeltaStudy,
        rm: EvolutionVerdict,
        ricci: EvolutionVerdict,
    },
    Conditions(ConditionCheck),
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub format: &'static str,
    pub version: u32,
    pub which: CheckKind,
    pub config_hash: String,
    pub seed: u64,
    pub preset: PresetKind,
    pub n: usize,
    pub resolution: usize,
    pub pass: bool,
    pub details: CheckDetails,
}

fn evolution_verdict(res: &[EvolutionResidual], orders: &[f64], cfg: &RunConfig) -> EvolutionVerdict {
    let c = &cfg.check;
    let exact = res.iter().all(|r| r.sup <= c.exact_floor);
    let in_band = !orders.is_empty() && orders.iter().all(|o| *o >= c.min_order && *o <= c.max_order);
    EvolutionVerdict {
        exact,
        orders: orders.to_vec(),
        pass: exact || in_band,
    }
}

fn condition_check(cfg: &RunConfig) -> Result<ConditionCheck> {
    let (_, g) = cfg.initial_metric()?;
    let pkg = ChernPackage::compute(&g)?;
    let injected = cfg.preset.name == PresetKind::SyntheticInjection;
    let rm = if injected { minus_b_field(&g) } else { pkg.rm_lowered.clone() };
    let report: CurvatureReport = analyze(&rm, &g, &pkg.g_inverse, 0.0, &cfg.condition_settings())?;
    Ok(ConditionCheck {
        summary: classify(&report),
        kappa_bound: report.griffiths.kappa_bound,
        min_pinch_margin: report.pinch.min_ricci_margin,
        pinch_violations: report.pinch.violated.clone(),
        griffiths_converged: report.griffiths.converged,
        injected_minus_b: injected,
    })
}

/// Runs one verification suite on the configured preset; the report is
/// written to `check_<which>.json` whatever the verdict.
pub fn execute_check(cfg: &RunConfig, which: CheckKind, out: &Path) -> Result<CheckReport> {
    let details = match which {
        CheckKind::Identities => {
            let (_, g) = cfg.initial_metric()?;
            let pkg = ChernPackage::compute(&g)?;
            CheckDetails::Identities(identity_suite(&pkg, cfg.check.identity_tolerance, cfg.preset.seed)?)
        }
        CheckKind::Evolution => {
            let (_, g) = cfg.initial_metric()?;
            let c = &cfg.check;
            let study = delta_study(&g, c.t_star, &c.deltas, c.substeps)?;
            let rm = evolution_verdict(&study.rm, &study.rm_orders, cfg);
            let ricci = evolution_verdict(&study.ricci, &study.ricci_orders, cfg);
            CheckDetails::Evolution { study, rm, ricci }
        }
        CheckKind::Conditions => CheckDetails::Conditions(condition_check(cfg)?),
    };
    let pass = match &details {
        CheckDetails::Identities(r) => r.all_pass(),
        CheckDetails::Evolution { rm, ricci, .. } => rm.pass && ricci.pass,
        CheckDetails::Conditions(c) => {
            c.summary.griffiths_nonpositive && c.summary.ricci_quasi_negative && c.pinch_violations.is_empty()
        }
    };
    let report = CheckReport {
        format: "hcf-check-report",
        version: REPORT_VERSION,
        which,
        config_hash: cfg.hash(),
        seed: cfg.preset.seed,
        preset: cfg.preset.name,
        n: cfg.grid.n,
        resolution: cfg.grid.resolution,
        pass,
        details,
    };
    create_dir(out)?;
    write_json(&out.join(format!("check_{}.json", which.name())), &report)?;
    Ok(report)
}

pub fn render_check(report: &CheckReport) -> String {
    let mut s = String::new();
    match &report.details {
        CheckDetails::Identities(r) => s.push_str(&r.render()),
        CheckDetails::Evolution { study, rm, ricci } => {
            for (name, res, v) in [("curvature", &study.rm, rm), ("ricci", &study.ricci, ricci)] {
                for r in res {
                    s.push_str(&format!(
                        "{name:<9} delta {:>9.3e}  sup {:>10.3e}  holo-first {:>10.3e}  torsion terms {:>10.3e}\n",
                        r.delta, r.sup, r.sup_holo_first, r.torsion_terms_sup
                    ));
                }
                s.push_str(&format!(
                    "{} {name} orders {:?}{}\n",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.orders,
                    if v.exact { " (exact)" } else { "" }
                ));
            }
        }
        CheckDetails::Conditions(c) => {
            let b = |v: bool| if v { "yes" } else { "no" };
            s.push_str(&format!(
                "griffiths max {:.6e} (nonpositive: {})\nricci max {:.6e} (nonpositive: {}, quasi-negative: {})\nmin pinch margin {:.6e}, violations {}\n",
                c.summary.griffiths_max,
                b(c.summary.griffiths_nonpositive),
                c.summary.ricci_max,
                b(c.summary.ricci_nonpositive),
                b(c.summary.ricci_quasi_negative),
                c.min_pinch_margin,
                c.pinch_violations.len()
            ));
        }
    }
    s.push_str(&format!(
        "{} {}\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.which.name()
    ));
    s
}

pub fn cmd_check(cfg: &RunConfig, which: CheckKind, out: &Path) -> Result<Outcome> {
    let report = execute_check(cfg, which, out)?;
    print!("{}", render_check(&report));
    Ok(if report.pass {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub format: &'static str,
    pub version: u32,
    pub field: String,
    pub seed: u64,
    pub table: ProbeTable,
    pub spectral_orders: Vec<f64>,
    pub central_difference_orders: Vec<f64>,
}

pub fn cmd_probe(field: &str, n: usize, resolutions: &[usize], seed: u64, out: &Path) -> Result<Outcome> {
    let f = ProbeField::named(field, n, seed)?;
    let modes = [DerivativeMode::Spectral, DerivativeMode::CentralDifference4];
    let table = convergence_probe(&f, n, resolutions, &modes)?;
    for r in &table.rows {
        println!("{:<22} {:>5} {:>12.4e}", format!("{:?}", r.mode), r.resolution, r.max_error);
    }
    let report = ProbeReport {
        format: "hcf-probe-report",
        version: REPORT_VERSION,
        field: field.to_string(),
        seed,
        spectral_orders: table.observed_orders(DerivativeMode::Spectral),
        central_difference_orders: table.observed_orders(DerivativeMode::CentralDifference4),
        table,
    };
    println!("central-difference orders {:?}", report.central_difference_orders);
    create_dir(out)?;
    write_json(&out.join("probe.json"), &report)?;
    Ok(Outcome::Success)
}
