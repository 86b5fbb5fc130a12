//! Scenario execution and artifact writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use spin7flow::exterior::mask_label;
use spin7flow::flow::{
    DegenerateFlowState, DegenerateProblem, FlowConfig, FlowError, GenericFlowState, GenericProblem, Integrator,
    Sample, Smoothness, Trajectory,
};
use spin7flow::g2spin7::model_phi;
use spin7flow::homogeneous::{aloff_wallach_pair, registry};
use spin7flow::stable::StructureKind;
use spin7flow::KForm;

use crate::config::{IntegratorName, Point, ScenarioConfig};
use crate::identities::{verify_identities, IdentityReport};
use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub verify: bool,
    pub report_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    PreconditionFailed,
    NumericalFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::PreconditionFailed => 2,
            RunStatus::NumericalFailure => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub c: f64,
    pub ok: bool,
    pub fit_residual: f64,
    pub omega_residual: f64,
    pub e_phi_scale: f64,
    pub orientation_flipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub max_cocalibration: Option<f64>,
    pub max_torsion: Option<f64>,
    pub max_normalization: Option<f64>,
    pub s_norm_drift: Option<f64>,
    pub signatures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub point: Point,
    pub status: RunStatus,
    pub message: Option<String>,
    pub stop_reason: Option<String>,
    pub stop_detail: Option<String>,
    pub t_final: Option<f64>,
    pub samples: usize,
    pub smoothness: Option<SmoothnessReport>,
    pub monitors: MonitorSummary,
    pub class_first: Option<String>,
    pub class_last: Option<String>,
    pub f_series: Vec<[f64; 2]>,
    pub identities: Option<IdentityReport>,
    pub directory: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct IndexEntry<'a> {
    directory: &'a Path,
    point: &'a Point,
    status: RunStatus,
    stop_reason: &'a Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub reports: Vec<RunReport>,
    pub index: PathBuf,
}

impl RunSummary {
    /// Worst status over all points.
    pub fn exit_code(&self) -> i32 {
        self.reports.iter().map(|r| r.status.exit_code()).max().unwrap_or(0)
    }
}

/// Flow settings for a scenario, with the config's overrides applied.
pub fn flow_config(cfg: &ScenarioConfig) -> FlowConfig {
    let (space, t_end, integrator, step, tol, sample_dt) = match cfg.scenario.as_str() {
        "n11-spin7" => ("n11", 0.5, IntegratorName::Rk45, None, 1e-10, 0.01),
        "n11-generic" => ("n11", 1.0, IntegratorName::Rk45, None, 1e-9, 0.01),
        _ => ("abelian7", 1.0, IntegratorName::Rk4, Some(0.05), 1e-9, 0.1),
    };
    let f = &cfg.flow;
    let integrator = match f.integrator.unwrap_or(integrator) {
        IntegratorName::Rk4 => Integrator::Rk4Fixed {
            step: f.step.or(step).unwrap_or(1e-4),
        },
        IntegratorName::Rk45 => Integrator::Rk45 {
            tol: f.tol.unwrap_or(tol),
            initial_step: f.step.or(step).unwrap_or(1e-3),
        },
    };
    let mut out = FlowConfig::new(space, f.t_end.unwrap_or(t_end), integrator);
    out.startup_epsilon = f.startup_epsilon;
    out.sample_dt = f.sample_dt.unwrap_or(sample_dt);
    if let Some(r) = f.max_retries {
        out.max_retries = r;
    }
    out
}

enum Outcome {
    Degenerate {
        traj: Trajectory<DegenerateFlowState>,
        problem: DegenerateProblem,
        smoothness: SmoothnessReport,
    },
    Generic {
        traj: Trajectory<GenericFlowState>,
        problem: GenericProblem,
    },
    Refused {
        status: RunStatus,
        message: String,
        smoothness: Option<SmoothnessReport>,
    },
}

fn status_of(e: &FlowError) -> RunStatus {
    match e {
        FlowError::PreconditionFailed(_) | FlowError::NotProportional(_) | FlowError::Setup(_) => {
            RunStatus::PreconditionFailed
        }
        _ => RunStatus::NumericalFailure,
    }
}

fn refuse(e: FlowError, smoothness: Option<SmoothnessReport>) -> Outcome {
    Outcome::Refused {
        status: status_of(&e),
        message: e.to_string(),
        smoothness,
    }
}

fn smoothness_report(sm: &Smoothness, scale: f64, flipped: bool) -> SmoothnessReport {
    SmoothnessReport {
        c: sm.c,
        ok: sm.ok,
        fit_residual: sm.fit_residual,
        omega_residual: sm.omega_residual,
        e_phi_scale: scale,
        orientation_flipped: flipped,
    }
}

fn run_spin7(point: &Point, flow: &FlowConfig) -> Outcome {
    let (a, b, c, theta) = (
        point.get("a", 1.0),
        point.get("b", 1.0),
        point.get("c_param", 1.0),
        point.get("theta", 0.0),
    );
    let (omega0, rho0) = aloff_wallach_pair(a, b, c, theta);
    let base = if point.flag("squared", true) { 0.5 } else { 1.0 };
    let attempt = || -> Result<Outcome, (FlowError, Option<SmoothnessReport>)> {
        let space = registry("n11").map_err(|e| (e.into(), None))?;
        let mut scale = base;
        let mut problem = DegenerateProblem::new(space.clone(), 6, scale).map_err(|e| (e, None))?;
        let mut sm = problem.smoothness_check(&omega0, &rho0).map_err(|e| (e, None))?;
        let mut flipped = false;
        // a smooth generator with the wrong orientation is fixed by e_φ ↦ −e_φ
        if sm.ok && sm.c < 0.0 {
            scale = -scale;
            flipped = true;
            problem = DegenerateProblem::new(space, 6, scale).map_err(|e| (e, None))?;
            sm = problem.smoothness_check(&omega0, &rho0).map_err(|e| (e, None))?;
        }
        let report = smoothness_report(&sm, scale, flipped);
        let seed = problem
            .startup_seed(&omega0, &rho0, flow.startup_epsilon)
            .map_err(|e| (e, Some(report.clone())))?;
        let mut traj = problem.integrate(flow, &seed).map_err(|e| (e, Some(report.clone())))?;
        if traj.samples.len() >= 3 {
            traj.fill_torsion(problem.space()).map_err(|e| (e, Some(report.clone())))?;
        }
        Ok(Outcome::Degenerate {
            traj,
            problem,
            smoothness: report,
        })
    };
    attempt().unwrap_or_else(|(e, sm)| refuse(e, sm))
}

fn generic_seed_phi(point: &Point) -> KForm<f64> {
    let (omega0, rho0) = aloff_wallach_pair(
        point.get("a", 1.0),
        point.get("b", 1.0),
        point.get("c_param", 1.0),
        point.get("theta", 0.0),
    );
    let e7 = KForm::from_terms(7, 1, &[(1, &[7])]);
    let first6 = [0, 1, 2, 3, 4, 5];
    omega0
        .embed(7, &first6)
        .and_then(|w| w.wedge(&e7))
        .map(|w| w.add(&rho0.embed(7, &first6).expect("6 < 7")))
        .expect("forms on R^7")
}

fn run_generic(space_name: &str, phi: KForm<f64>, flow: &FlowConfig) -> Outcome {
    let attempt = || -> Result<Outcome, FlowError> {
        let problem = GenericProblem::new(registry(space_name)?)?;
        let seed = GenericFlowState {
            t: 0.0,
            x: problem.coords(&phi)?,
        };
        let residual = problem.cocal_residual(&seed)?;
        if residual > 1e-10 {
            return Err(FlowError::Setup(format!("seed is not cocalibrated (d*phi = {residual:e})")));
        }
        let mut traj = problem.integrate(flow, &seed)?;
        if traj.samples.len() >= 3 {
            traj.fill_torsion(problem.space())?;
        }
        Ok(Outcome::Generic { traj, problem })
    };
    attempt().unwrap_or_else(|e| refuse(e, None))
}

fn summary<S>(traj: &Trajectory<S>) -> MonitorSummary {
    let has_torsion = traj.samples.iter().any(|s| s.monitors.torsion.is_some());
    let norms: Vec<f64> = traj.samples.iter().filter_map(|s| s.monitors.s_norm).collect();
    let mut signatures: Vec<String> = Vec::new();
    for s in &traj.samples {
        let label = s.monitors.signature.to_string();
        if !signatures.contains(&label) {
            signatures.push(label);
        }
    }
    MonitorSummary {
        max_cocalibration: Some(traj.max_monitor(|m| Some(m.cocalibration))),
        max_torsion: has_torsion.then(|| traj.max_monitor(|m| m.torsion)),
        max_normalization: Some(traj.max_monitor(|m| Some(m.normalization))),
        s_norm_drift: norms
            .first()
            .map(|first| norms.iter().map(|n| (n - first).abs()).fold(0.0, f64::max)),
        signatures,
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn push_monitor_columns<S>(row: &mut String, s: &Sample<S>) {
    let m = &s.monitors;
    let torsion = m.torsion.map(fmt_num).unwrap_or_default();
    let s_norm = m.s_norm.map(fmt_num).unwrap_or_default();
    let _ = write!(
        row,
        ",{},{},{},{},{},{}",
        fmt_num(m.cocalibration),
        torsion,
        fmt_num(m.normalization),
        s_norm,
        m.signature.positive,
        m.signature.negative
    );
}

const MONITOR_HEADER: &str = "cocalibration,torsion,normalization,s_norm,sig_pos,sig_neg";

pub fn degenerate_csv(problem: &DegenerateProblem, traj: &Trajectory<DegenerateFlowState>) -> String {
    let (w_labels, s_labels) = problem.labels();
    let mut out = String::from("t,f");
    for m in &w_labels {
        let _ = write!(out, ",w_{}", mask_label(*m));
    }
    for m in &s_labels {
        let _ = write!(out, ",s_{}", mask_label(*m));
    }
    let _ = writeln!(out, ",{MONITOR_HEADER}");
    for s in &traj.samples {
        let mut row = format!("{},{}", fmt_num(s.t), fmt_num(s.state.f));
        for x in s.state.w.iter().chain(&s.state.s) {
            let _ = write!(row, ",{}", fmt_num(*x));
        }
        push_monitor_columns(&mut row, s);
        let _ = writeln!(out, "{row}");
    }
    out
}

pub fn generic_csv(problem: &GenericProblem, traj: &Trajectory<GenericFlowState>) -> String {
    let mut out = String::from("t");
    for m in &problem.phi_frame().labels {
        let _ = write!(out, ",x_{}", mask_label(*m));
    }
    let _ = writeln!(out, ",{MONITOR_HEADER}");
    for s in &traj.samples {
        let mut row = fmt_num(s.t);
        for x in &s.state.x {
            let _ = write!(row, ",{}", fmt_num(*x));
        }
        push_monitor_columns(&mut row, s);
        let _ = writeln!(out, "{row}");
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn stop_fields<S>(traj: &Trajectory<S>) -> (RunStatus, Option<String>, Option<String>) {
    let status = if traj.stop.is_outcome() {
        RunStatus::Ok
    } else {
        RunStatus::NumericalFailure
    };
    (status, Some(traj.stop.label().to_string()), Some(format!("{:?}", traj.stop)))
}

/// Execute one sweep point and write its artifacts into `dir`.
pub fn run_point(
    cfg: &ScenarioConfig,
    point: &Point,
    dir: &Path,
    options: RunOptions,
) -> Result<RunReport, CliError> {
    let flow = flow_config(cfg);
    let outcome = match cfg.scenario.as_str() {
        "n11-spin7" => run_spin7(point, &flow),
        "n11-generic" => run_generic("n11", generic_seed_phi(point), &flow),
        _ => run_generic("abelian7", model_phi::<f64>(StructureKind::Su3), &flow),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let mut report = RunReport {
        scenario: cfg.scenario.clone(),
        point: point.clone(),
        status: RunStatus::Ok,
        message: None,
        stop_reason: None,
        stop_detail: None,
        t_final: None,
        samples: 0,
        smoothness: None,
        monitors: MonitorSummary::default(),
        class_first: None,
        class_last: None,
        f_series: Vec::new(),
        identities: options.verify.then(verify_identities),
        directory: dir.to_path_buf(),
    };
    let csv = match outcome {
        Outcome::Refused {
            status,
            message,
            smoothness,
        } => {
            report.status = status;
            report.message = Some(message);
            report.smoothness = smoothness;
            None
        }
        Outcome::Degenerate {
            traj,
            problem,
            smoothness,
        } => {
            (report.status, report.stop_reason, report.stop_detail) = stop_fields(&traj);
            report.smoothness = Some(smoothness);
            report.f_series = traj.samples.iter().map(|s| [s.t, s.state.f]).collect();
            fill_common(&mut report, &traj);
            Some(degenerate_csv(&problem, &traj))
        }
        Outcome::Generic { traj, problem } => {
            (report.status, report.stop_reason, report.stop_detail) = stop_fields(&traj);
            fill_common(&mut report, &traj);
            Some(generic_csv(&problem, &traj))
        }
    };
    if let (Some(csv), false) = (csv, options.report_only) {
        write_file(&dir.join("trajectory.csv"), &csv)?;
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("report.json"), &json)?;
    Ok(report)
}

fn fill_common<S>(report: &mut RunReport, traj: &Trajectory<S>) {
    report.samples = traj.samples.len();
    report.t_final = traj.samples.last().map(|s| s.t);
    report.monitors = summary(traj);
    report.class_first = traj.samples.first().map(|s| s.monitors.class.clone());
    report.class_last = traj.samples.last().map(|s| s.monitors.class.clone());
}

/// Run every sweep point concurrently and write the aggregate index.
pub fn run(cfg: &ScenarioConfig, options: RunOptions) -> Result<RunSummary, CliError> {
    let points = cfg.points();
    let single = points.len() == 1;
    let reports = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let dir = if single {
                cfg.output.clone()
            } else {
                cfg.output.join(format!("point-{i:03}"))
            };
            run_point(cfg, p, &dir, options)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let index: Vec<IndexEntry> = reports
        .iter()
        .map(|r| IndexEntry {
            directory: &r.directory,
            point: &r.point,
            status: r.status,
            stop_reason: &r.stop_reason,
        })
        .collect();
    let path = cfg.output.join("index.json");
    write_file(&path, &serde_json::to_string_pretty(&index).expect("index serializes"))?;
    Ok(RunSummary { reports, index: path })
}
