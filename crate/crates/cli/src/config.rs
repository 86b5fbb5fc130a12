//! Scenario configuration: a strict JSON document plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCENARIOS: [&str; 3] = ["n11-spin7", "n11-generic", "flat-abelian"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Flag(bool),
    Number(f64),
    List(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorName {
    Rk4,
    Rk45,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub t_end: Option<f64>,
    pub integrator: Option<IntegratorName>,
    /// Fixed step for rk4, initial step for rk45.
    pub step: Option<f64>,
    pub tol: Option<f64>,
    pub startup_epsilon: Option<f64>,
    pub sample_dt: Option<f64>,
    pub max_retries: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("spin7flow-out")
}

/// One point of a parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub values: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
}

impl Point {
    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).copied().unwrap_or(default)
    }

    pub fn flag(&self, key: &str, default: bool) -> bool {
        self.flags.get(key).copied().unwrap_or(default)
    }
}

fn allowed_params(scenario: &str) -> &'static [&'static str] {
    match scenario {
        "n11-spin7" => &["a", "b", "c_param", "theta", "squared"],
        "n11-generic" => &["a", "b", "c_param", "theta"],
        _ => &[],
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Value, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            source_name: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Strict conversion of a JSON value, then semantic validation.
    pub fn from_value(value: Value, source_name: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = serde_json::from_value(value).map_err(|e| CliError::Parse {
            source_name: source_name.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(CliError::Invalid(format!(
                "unknown scenario `{}`; expected one of {}",
                self.scenario,
                SCENARIOS.join(", ")
            )));
        }
        let allowed = allowed_params(&self.scenario);
        for (key, value) in &self.params {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Invalid(format!(
                    "params.{key}: not a parameter of scenario `{}`",
                    self.scenario
                )));
            }
            let is_flag = key == "squared";
            match (value, is_flag) {
                (ParamValue::Flag(_), true) | (ParamValue::Number(_) | ParamValue::List(_), false) => {}
                _ => return Err(CliError::Invalid(format!("params.{key}: wrong value type"))),
            }
            if let ParamValue::List(v) = value {
                if v.is_empty() {
                    return Err(CliError::Invalid(format!("params.{key}: empty list")));
                }
            }
            if ["a", "b", "c_param"].contains(&key.as_str()) && values_of(value).contains(&0.0) {
                return Err(CliError::Invalid(format!("params.{key}: must be nonzero")));
            }
        }
        let f = &self.flow;
        let positive = [("t_end", f.t_end), ("step", f.step), ("tol", f.tol), ("sample_dt", f.sample_dt)];
        for (name, v) in positive {
            if let Some(x) = v {
                if !(x > 0.0) {
                    return Err(CliError::Invalid(format!("flow.{name}: must be positive, got {x}")));
                }
            }
        }
        if let Some(e) = f.startup_epsilon {
            if !(e > 0.0) {
                return Err(CliError::Invalid(format!("flow.startup_epsilon: must be positive, got {e}")));
            }
        }
        Ok(())
    }

    /// Cartesian product of the list-valued parameters, in key order.
    pub fn points(&self) -> Vec<Point> {
        let mut points = vec![Point {
            values: BTreeMap::new(),
            flags: BTreeMap::new(),
        }];
        for (key, value) in &self.params {
            if let ParamValue::Flag(b) = value {
                for p in &mut points {
                    p.flags.insert(key.clone(), *b);
                }
                continue;
            }
            let mut next = Vec::new();
            for p in &points {
                for x in values_of(value) {
                    let mut q = p.clone();
                    q.values.insert(key.clone(), x);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

fn values_of(v: &ParamValue) -> Vec<f64> {
    match v {
        ParamValue::Flag(_) => vec![],
        ParamValue::Number(x) => vec![*x],
        ParamValue::List(xs) => xs.clone(),
    }
}

/// Apply `key=value`; bare keys address `params`, dotted keys address
/// `flow.*`, and `output` / `scenario` address the top level. Values are
/// parsed as JSON, falling back to a string.
pub fn apply_set(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Invalid(format!("--set expects key=value, got `{assignment}`")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let path: Vec<&str> = match key.split_once('.') {
        Some((head, tail)) => vec![head, tail],
        None if key == "output" || key == "scenario" => vec![key],
        None => vec!["params", key],
    };
    set_path(doc, &path, value)
}

pub fn set_path(doc: &mut Value, path: &[&str], value: Value) -> Result<(), CliError> {
    let mut cur = doc;
    for (i, part) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Invalid(format!("cannot set `{}`: parent is not an object", path.join("."))))?;
        if i + 1 == path.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
