//! Flat dotted-key configuration documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use backreact_core::box3d::{BoxParams, ClosedFormConvention, CreationEnergyModel, TimeVariable};
use backreact_core::ring1d::{RingParams, CRITICAL_MARGIN};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed config document: {0}")]
    Syntax(String),
    #[error("unknown key `{key}` for model {model}")]
    UnknownKey { key: String, model: String },
    #[error("`{key}` = {value} is out of range (allowed: {allowed})")]
    OutOfRange { key: String, value: String, allowed: String },
    #[error("missing required key `{0}`")]
    MissingRequired(String),
    #[error("`{key}` must be {expected}")]
    WrongType { key: String, expected: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ring,
    Box,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ring => "ring",
            Model::Box => "box",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSection {
    pub params: RingParams,
    pub backreaction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSection {
    pub params: BoxParams,
    pub convention: ClosedFormConvention,
    pub time_variable: TimeVariable,
}

impl BoxSection {
    pub fn energy_model(&self) -> CreationEnergyModel {
        CreationEnergyModel {
            convention: self.convention,
            time_variable: self.time_variable,
            ..CreationEnergyModel::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelConfig {
    Ring(RingSection),
    Box(BoxSection),
}

/// A fully validated run description. Every run is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub l0: f64,
    /// One simulation per initial velocity.
    pub v0: Vec<f64>,
    pub t_end: f64,
    pub tol: f64,
    /// Output sampling interval.
    pub dt: f64,
    pub output_dir: String,
    pub name: String,
}

impl RunConfig {
    pub fn kind(&self) -> Model {
        match self.model {
            ModelConfig::Ring(_) => Model::Ring,
            ModelConfig::Box(_) => Model::Box,
        }
    }

    pub fn t_start(&self) -> f64 {
        match &self.model {
            ModelConfig::Ring(_) => 0.0,
            ModelConfig::Box(b) => b.params.t0,
        }
    }
}

const COMMON_KEYS: &[&str] = &["model", "ic.L0", "ic.V0", "t_end", "solver.tol", "solver.dt", "output.dir", "output.name"];
const RING_KEYS: &[&str] = &["ring.M", "ring.l", "ring.backreaction"];
const BOX_KEYS: &[&str] = &["box.l", "box.m", "box.t0", "box.convention", "box.time"];

/// Keys that a sweep axis may address.
pub const NUMERIC_KEYS: &[&str] = &[
    "ic.L0",
    "ic.V0",
    "t_end",
    "solver.tol",
    "solver.dt",
    "ring.M",
    "ring.l",
    "box.l",
    "box.m",
    "box.t0",
];

pub const TOL_RANGE: (f64, f64) = (1e-14, 1e-2);
/// Upper bound on output samples per run.
pub const MAX_SAMPLES: f64 = 1e7;

/// Flattened `key → value` view of a document.
pub type KeyMap = BTreeMap<String, toml::Value>;

/// Parse a document into its flattened key map without validating it.
pub fn parse_keys(text: &str) -> Result<KeyMap, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    let mut out = KeyMap::new();
    flatten("", &table, &mut out);
    Ok(out)
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut KeyMap) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    validate(&parse_keys(text)?)
}

struct Reader<'a> {
    keys: &'a KeyMap,
}

impl Reader<'_> {
    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.keys.get(key) {
            None => Ok(None),
            Some(v) => as_float(key, v).map(Some),
        }
    }

    fn float_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn string(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.keys.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(wrong_type(key, "a string")),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.keys.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(wrong_type(key, "a boolean")),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.keys.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items.iter().map(|v| as_float(key, v)).collect::<Result<Vec<_>, _>>().map(Some),
            Some(v) => as_float(key, v).map(|x| Some(vec![x])),
        }
    }
}

fn wrong_type(key: &str, expected: &'static str) -> ConfigError {
    ConfigError::WrongType {
        key: key.to_string(),
        expected,
    }
}

fn as_float(key: &str, v: &toml::Value) -> Result<f64, ConfigError> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(wrong_type(key, "a number")),
    }
}

fn out_of_range(key: &str, value: impl ToString, allowed: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        allowed: allowed.into(),
    }
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(out_of_range(key, x, "finite, > 0"))
    }
}

/// Validate a flattened key map and fill in defaults.
pub fn validate(keys: &KeyMap) -> Result<RunConfig, ConfigError> {
    let r = Reader { keys };
    let model = match r.string("model")? {
        None => return Err(ConfigError::MissingRequired("model".into())),
        Some("ring") => Model::Ring,
        Some("box") => Model::Box,
        Some(other) => return Err(out_of_range("model", format!("{other:?}"), "\"ring\" or \"box\"")),
    };
    let own = match model {
        Model::Ring => RING_KEYS,
        Model::Box => BOX_KEYS,
    };
    if let Some(key) = keys.keys().find(|k| !COMMON_KEYS.contains(&k.as_str()) && !own.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey {
            key: key.clone(),
            model: model.name().into(),
        });
    }

    let (section, l0_default, v0_default, t_end_default, dt_default) = match model {
        Model::Ring => {
            let params = RingParams {
                mass: positive("ring.M", r.float_or("ring.M", 1.0)?)?,
                l: positive("ring.l", r.float_or("ring.l", 1.0)?)?,
                ..RingParams::default()
            };
            let backreaction = r.boolean("ring.backreaction")?.unwrap_or(true);
            (ModelConfig::Ring(RingSection { params, backreaction }), 1.0, vec![0.0], 5.0, 1e-3)
        }
        Model::Box => {
            let params = BoxParams {
                l: positive("box.l", r.float_or("box.l", 50.0)?)?,
                mirror_mass: positive("box.m", r.float_or("box.m", 10.0)?)?,
                t0: positive("box.t0", r.float_or("box.t0", 1.0)?)?,
                ..BoxParams::default()
            };
            let convention = match r.string("box.convention")?.unwrap_or("published") {
                "published" => ClosedFormConvention::Published,
                "reconciled" => ClosedFormConvention::Reconciled,
                other => return Err(out_of_range("box.convention", format!("{other:?}"), "\"published\" or \"reconciled\"")),
            };
            let time_variable = match r.string("box.time")?.unwrap_or("cosmic") {
                "cosmic" => TimeVariable::Cosmic,
                "conformal" => TimeVariable::Conformal,
                other => return Err(out_of_range("box.time", format!("{other:?}"), "\"cosmic\" or \"conformal\"")),
            };
            let l = params.l;
            (
                ModelConfig::Box(BoxSection {
                    params,
                    convention,
                    time_variable,
                }),
                l,
                vec![-0.5, 0.5],
                backreact_core::box3d::DEFAULT_T_END,
                1e-2,
            )
        }
    };

    let l0 = positive("ic.L0", r.float_or("ic.L0", l0_default)?)?;
    if let ModelConfig::Ring(ring) = &section {
        let floor = if ring.backreaction {
            ring.params.critical_length() * (1.0 + CRITICAL_MARGIN)
        } else {
            0.0
        };
        if l0 <= floor {
            return Err(out_of_range("ic.L0", l0, format!("> {floor:e} (critical length)")));
        }
    }
    let v0 = r.floats("ic.V0")?.unwrap_or(v0_default);
    if v0.is_empty() {
        return Err(ConfigError::MissingRequired("ic.V0".into()));
    }
    if let Some(bad) = v0.iter().find(|v| !v.is_finite()) {
        return Err(out_of_range("ic.V0", bad, "finite"));
    }

    let start = match &section {
        ModelConfig::Ring(_) => 0.0,
        ModelConfig::Box(b) => b.params.t0,
    };
    let t_end = r.float_or("t_end", t_end_default)?;
    if !(t_end.is_finite() && t_end > start) {
        return Err(out_of_range("t_end", t_end, format!("finite, > {start}")));
    }
    let tol = r.float_or("solver.tol", 1e-10)?;
    if !(tol >= TOL_RANGE.0 && tol <= TOL_RANGE.1) {
        return Err(out_of_range("solver.tol", tol, format!("[{:e}, {:e}]", TOL_RANGE.0, TOL_RANGE.1)));
    }
    let dt = positive("solver.dt", r.float_or("solver.dt", dt_default)?)?;
    if (t_end - start) / dt > MAX_SAMPLES {
        return Err(out_of_range("solver.dt", dt, format!(">= (t_end - t_start)/{MAX_SAMPLES:e}")));
    }

    let output_dir = r.string("output.dir")?.unwrap_or("out").to_string();
    if output_dir.is_empty() {
        return Err(out_of_range("output.dir", "\"\"", "non-empty path"));
    }
    let name = r.string("output.name")?.unwrap_or(model.name()).to_string();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) || name.starts_with('.') {
        return Err(out_of_range(
            "output.name",
            format!("{name:?}"),
            "non-empty [A-Za-z0-9_.-], not starting with '.'",
        ));
    }

    Ok(RunConfig {
        model: section,
        l0,
        v0,
        t_end,
        tol,
        dt,
        output_dir,
        name,
    })
}

fn float_text(x: f64) -> String {
    toml::Value::Float(x).to_string()
}

fn string_text(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Render a config as a document that parses back to the same config.
pub fn emit_config(c: &RunConfig) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    line("model", string_text(c.kind().name()));
    match &c.model {
        ModelConfig::Ring(r) => {
            line("ring.M", float_text(r.params.mass));
            line("ring.l", float_text(r.params.l));
            line("ring.backreaction", r.backreaction.to_string());
        }
        ModelConfig::Box(b) => {
            line("box.l", float_text(b.params.l));
            line("box.m", float_text(b.params.mirror_mass));
            line("box.t0", float_text(b.params.t0));
            let conv = match b.convention {
                ClosedFormConvention::Published => "published",
                ClosedFormConvention::Reconciled => "reconciled",
            };
            line("box.convention", string_text(conv));
            let time = match b.time_variable {
                TimeVariable::Cosmic => "cosmic",
                TimeVariable::Conformal => "conformal",
            };
            line("box.time", string_text(time));
        }
    }
    line("ic.L0", float_text(c.l0));
    let v0: Vec<String> = c.v0.iter().map(|v| float_text(*v)).collect();
    line("ic.V0", format!("[{}]", v0.join(", ")));
    line("t_end", float_text(c.t_end));
    line("solver.tol", float_text(c.tol));
    line("solver.dt", float_text(c.dt));
    line("output.dir", string_text(&c.output_dir));
    line("output.name", string_text(&c.name));
    s
}
