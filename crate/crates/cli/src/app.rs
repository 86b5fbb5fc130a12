//! Command-line front end.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::config::{apply_set, set_path, ScenarioConfig};
use crate::identities::verify_identities;
use crate::runner::{run, RunOptions};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Rk4,
    Rk45,
}

#[derive(Debug, Parser)]
#[command(name = "spin7flow", version, about = "Run Hitchin-flow scenarios on homogeneous spaces")]
pub struct Args {
    /// JSON scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario: n11-spin7, n11-generic or flat-abelian.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Override a value, e.g. `a=2`, `theta=[0,0.3]`, `flow.sample_dt=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub startup_epsilon: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Run the exact model identity suite (alone, or attached to each report).
    #[arg(long)]
    pub verify: bool,
    /// Skip the trajectory CSV.
    #[arg(long)]
    pub report_only: bool,
}

impl Args {
    /// The merged configuration document, or `None` for a verify-only call.
    pub fn document(&self) -> Result<Option<(Value, String)>, CliError> {
        let (mut doc, name) = match (&self.config, &self.scenario) {
            (Some(path), _) => (ScenarioConfig::from_path(path)?, path.display().to_string()),
            (None, Some(s)) => (json!({ "scenario": s }), "command line".to_string()),
            (None, None) => return Ok(None),
        };
        if let (Some(_), Some(s)) = (&self.config, &self.scenario) {
            set_path(&mut doc, &["scenario"], json!(s))?;
        }
        let flow_overrides = [
            ("t_end", self.t_end.map(|x| json!(x))),
            (
                "integrator",
                self.integrator.map(|i| json!(if i == IntegratorArg::Rk4 { "rk4" } else { "rk45" })),
            ),
            ("tol", self.tol.map(|x| json!(x))),
            ("startup_epsilon", self.startup_epsilon.map(|x| json!(x))),
        ];
        for (key, value) in flow_overrides {
            if let Some(v) = value {
                set_path(&mut doc, &["flow", key], v)?;
            }
        }
        if let Some(out) = &self.output {
            set_path(&mut doc, &["output"], json!(out))?;
        }
        for s in &self.set {
            apply_set(&mut doc, s)?;
        }
        Ok(Some((doc, name)))
    }
}

/// Run the command line and return the process exit code.
pub fn execute(args: &Args) -> i32 {
    match execute_inner(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute_inner(args: &Args) -> Result<i32, CliError> {
    let Some((doc, name)) = args.document()? else {
        if !args.verify {
            return Err(CliError::Invalid("give --config, --scenario or --verify".into()));
        }
        let report = verify_identities();
        for e in &report.entries {
            let tag = if e.passed { "PASS" } else { "FAIL" };
            if e.detail.is_empty() {
                println!("{tag} {}", e.name);
            } else {
                println!("{tag} {} ({})", e.name, e.detail);
            }
        }
        println!("{} passed, {} failed", report.passed, report.failed);
        if let Some(out) = &args.output {
            std::fs::create_dir_all(out).map_err(|e| CliError::Io(out.clone(), e))?;
            let path = out.join("identities.json");
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            std::fs::write(&path, json).map_err(|e| CliError::Io(path, e))?;
        }
        return Ok(0);
    };
    let cfg = ScenarioConfig::from_value(doc, &name)?;
    let options = RunOptions {
        verify: args.verify,
        report_only: args.report_only,
    };
    let summary = run(&cfg, options)?;
    for r in &summary.reports {
        let c = r
            .smoothness
            .as_ref()
            .map(|s| format!(" c={} ok={}", s.c, s.ok))
            .unwrap_or_default();
        let detail = r.message.as_deref().or(r.stop_reason.as_deref()).unwrap_or("");
        println!(
            "{} {:?}: {}{c} t_final={} -> {}",
            r.scenario,
            r.point.values,
            serde_json::to_string(&r.status).expect("status"),
            r.t_final.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            detail
        );
    }
    println!("index: {}", summary.index.display());
    Ok(summary.exit_code())
}
