//! Parameter sweeps along one numeric config key.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::config::{validate, ConfigError, KeyMap, NUMERIC_KEYS};
use crate::run::{ensure_dir, fmt_num, run, write_file, RunError, RunOutcome, Status};

/// A sweep axis, `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for Axis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, list) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax(format!("axis `{s}` is not of the form key=v1,v2,...")))?;
        let key = key.trim().to_string();
        if !NUMERIC_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::OutOfRange {
                key: "--axis".into(),
                value: key,
                allowed: NUMERIC_KEYS.join(", "),
            });
        }
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>().map_err(|_| ConfigError::WrongType {
                    key: key.clone(),
                    expected: "a number",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(ConfigError::MissingRequired(format!("{key} values")));
        }
        Ok(Axis { key, values })
    }
}

pub struct SweepPoint {
    pub value: f64,
    pub result: Result<RunOutcome, RunError>,
}

pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub summary: PathBuf,
}

impl SweepOutcome {
    pub fn status(&self) -> Status {
        self.points.iter().fold(Status::Clean, |acc, p| {
            acc.worst(match &p.result {
                Ok(o) => o.status(),
                Err(_) => Status::Error,
            })
        })
    }
}

const SUMMARY_HEADER: [&str; 12] = [
    "point",
    "key",
    "value",
    "V0",
    "status",
    "halt",
    "t_final",
    "L_final",
    "Ldot_final",
    "energy_drift",
    "lenz",
    "message",
];

/// Worker count: logical cores, capped by `DCE_WORKERS` when set.
pub fn worker_count() -> Result<usize, ConfigError> {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("DCE_WORKERS") {
        Err(_) => Ok(cores),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n.min(cores)),
            _ => Err(ConfigError::OutOfRange {
                key: "DCE_WORKERS".into(),
                value: v,
                allowed: "positive integer".into(),
            }),
        },
    }
}

/// Run `template` once per axis value, in parallel, and write a summary CSV.
/// A failing point is recorded in the summary and does not stop the others.
pub fn sweep(template: &KeyMap, axis: &Axis) -> Result<SweepOutcome, RunError> {
    let base = validate(template)?;
    let workers = worker_count()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    let points: Vec<SweepPoint> = pool.install(|| {
        axis.values
            .par_iter()
            .enumerate()
            .map(|(i, &value)| {
                let mut keys = template.clone();
                keys.insert(axis.key.clone(), toml::Value::Float(value));
                keys.insert("output.name".into(), toml::Value::String(format!("{}_{i}", base.name)));
                let result = validate(&keys).map_err(RunError::from).and_then(|c| run(&c));
                SweepPoint { value, result }
            })
            .collect()
    });

    let dir = PathBuf::from(&base.output_dir);
    ensure_dir(&dir)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for (i, p) in points.iter().enumerate() {
        let lead = [i.to_string(), axis.key.clone(), fmt_num(p.value)];
        match &p.result {
            Ok(outcome) => {
                for (sim, _) in &outcome.runs {
                    let last = sim.record.last().map(|s| s.state);
                    let status = match sim.status() {
                        Status::Clean => "clean",
                        _ => "truncated",
                    };
                    let drift = sim.record.diagnostics.energy_drift.map(fmt_num).unwrap_or_default();
                    let lenz = sim.invariants.lenz().map(|b| b.to_string()).unwrap_or_default();
                    let rest = [
                        fmt_num(sim.v0),
                        status.to_string(),
                        sim.record.halt.label().to_string(),
                        last.map(|s| fmt_num(s.t)).unwrap_or_default(),
                        last.map(|s| fmt_num(s.length)).unwrap_or_default(),
                        last.map(|s| fmt_num(s.velocity)).unwrap_or_default(),
                        drift,
                        lenz,
                        String::new(),
                    ];
                    w.write_record(lead.iter().chain(rest.iter())).expect("in-memory write");
                }
            }
            Err(e) => {
                let mut rest = vec![String::new(); 9];
                rest[1] = "error".into();
                rest[8] = e.to_string();
                w.write_record(lead.iter().chain(rest.iter())).expect("in-memory write");
            }
        }
    }
    let summary = dir.join(format!("{}_sweep.csv", base.name));
    write_file(&summary, &w.into_inner().expect("in-memory CSV writer cannot fail"))?;
    Ok(SweepOutcome { points, summary })
}
