//! Single runs: simulate every initial velocity of a config and emit CSV
//! time series with JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use backreact_core::box3d::{self, BoxRunOptions};
use backreact_core::ring1d::{self, RingRunOptions};
use backreact_core::SimulationRecord;
use serde::Serialize;
use thiserror::Error;

use crate::config::{emit_config, ModelConfig, RunConfig};

pub const RING_HEADER: &str = "t,L,Ldot,Lddot,E_casimir,E_kinetic_anomaly,E_total";
pub const BOX_HEADER: &str = "t,L,Ldot,Lddot,E_creation,E_kinetic,ratio_matter_bound";
/// `|L̇|` may grow by at most this much between samples for the Lenz check.
pub const LENZ_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("simulation failed for V0 = {v0}: {source}")]
    Simulation { v0: f64, source: backreact_core::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Process exit status of a run or sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Clean = 0,
    Truncated = 2,
    Error = 1,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn severity(self) -> u8 {
        match self {
            Status::Clean => 0,
            Status::Truncated => 1,
            Status::Error => 2,
        }
    }

    pub fn worst(self, other: Status) -> Status {
        if other.severity() > self.severity() {
            other
        } else {
            self
        }
    }
}

/// Invariant checks attached to a record.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Invariants {
    Ring {
        energy_drift: Option<f64>,
    },
    Box {
        max_speed_increase: f64,
        speed_non_increasing: bool,
        initial_matter_rate: Option<f64>,
        matter_energy_bound: Option<f64>,
        matter_bound_ratio: Option<f64>,
    },
}

impl Invariants {
    pub fn lenz(&self) -> Option<bool> {
        match self {
            Invariants::Box { speed_non_increasing, .. } => Some(*speed_non_increasing),
            Invariants::Ring { .. } => None,
        }
    }
}

/// One simulated initial condition.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub v0: f64,
    pub record: SimulationRecord,
    pub invariants: Invariants,
}

impl Simulated {
    pub fn status(&self) -> Status {
        if self.record.halt.is_clean() {
            Status::Clean
        } else {
            Status::Truncated
        }
    }
}

pub fn simulate(config: &RunConfig, v0: f64) -> Result<Simulated, RunError> {
    let wrap = |source| RunError::Simulation { v0, source };
    match &config.model {
        ModelConfig::Ring(r) => {
            let opts = RingRunOptions {
                tol: config.tol,
                dense_dt: config.dt,
            };
            let record = ring1d::simulate_ring(&r.params, (config.l0, v0), config.t_end, r.backreaction, &opts).map_err(wrap)?;
            let invariants = Invariants::Ring {
                energy_drift: record.diagnostics.energy_drift,
            };
            Ok(Simulated { v0, record, invariants })
        }
        ModelConfig::Box(b) => {
            let opts = BoxRunOptions {
                tol: config.tol,
                dense_dt: config.dt,
            };
            let record = box3d::simulate_box(&b.params, (config.l0, v0), (b.params.t0, config.t_end), &b.energy_model(), &opts).map_err(wrap)?;
            let increase = box3d::max_speed_increase(&record);
            let invariants = Invariants::Box {
                max_speed_increase: increase,
                speed_non_increasing: increase <= LENZ_SLACK,
                initial_matter_rate: box3d::initial_matter_rate(&record).ok(),
                matter_energy_bound: box3d::matter_energy_bound(&record).ok(),
                matter_bound_ratio: box3d::matter_bound_ratio(&record).ok(),
            };
            Ok(Simulated { v0, record, invariants })
        }
    }
}

/// 17 significant digits, locale independent.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory CSV writer cannot fail")
}

/// CSV bytes of one record.
pub fn render_csv(config: &RunConfig, sim: &Simulated) -> Vec<u8> {
    let mut w = csv_writer();
    let s = &sim.record.samples;
    match &config.model {
        ModelConfig::Ring(_) => {
            w.write_record(RING_HEADER.split(',')).expect("in-memory write");
            for x in s {
                let row = [
                    x.state.t,
                    x.state.length,
                    x.state.velocity,
                    x.accel,
                    x.energy.casimir,
                    x.energy.anomaly_kinetic,
                    x.energy.total,
                ];
                w.write_record(row.iter().map(|v| fmt_num(*v))).expect("in-memory write");
            }
        }
        ModelConfig::Box(_) => {
            w.write_record(BOX_HEADER.split(',')).expect("in-memory write");
            let rate = box3d::initial_matter_rate(&sim.record).map(f64::abs).unwrap_or(f64::NAN);
            let t0 = s.first().map(|x| x.state.t).unwrap_or(0.0);
            let mut peak: f64 = 0.0;
            for x in s {
                peak = peak.max(x.energy.creation.abs());
                let bound = rate * (x.state.t - t0);
                let ratio = if peak > 0.0 { bound / peak } else { f64::NAN };
                let row = [x.state.t, x.state.length, x.state.velocity, x.accel, x.energy.creation, x.energy.kinetic, ratio];
                w.write_record(row.iter().map(|v| fmt_num(*v))).expect("in-memory write");
            }
        }
    }
    finish(w)
}

#[derive(Debug, Serialize)]
struct HaltInfo {
    reason: &'static str,
    detail: String,
    t_final: Option<f64>,
    clean: bool,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    version: &'static str,
    model: &'static str,
    csv: &'a str,
    config: String,
    initial: [f64; 2],
    halt: HaltInfo,
    samples: usize,
    accepted_steps: usize,
    rejected_steps: usize,
    invariants: &'a Invariants,
}

/// JSON sidecar bytes of one record.
pub fn render_sidecar(config: &RunConfig, sim: &Simulated, csv_name: &str) -> Vec<u8> {
    let rec = &sim.record;
    let side = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        model: config.kind().name(),
        csv: csv_name,
        config: emit_config(config),
        initial: [config.l0, sim.v0],
        halt: HaltInfo {
            reason: rec.halt.label(),
            detail: rec.halt.to_string(),
            t_final: rec.last().map(|s| s.state.t),
            clean: rec.halt.is_clean(),
        },
        samples: rec.samples.len(),
        accepted_steps: rec.diagnostics.accepted_steps,
        rejected_steps: rec.diagnostics.rejected_steps,
        invariants: &sim.invariants,
    };
    let mut out = serde_json::to_vec_pretty(&side).expect("sidecar serializes");
    out.push(b'\n');
    out
}

/// Base file names for the records of a config.
pub fn stems(config: &RunConfig) -> Vec<String> {
    if config.v0.len() == 1 {
        vec![config.name.clone()]
    } else {
        (0..config.v0.len()).map(|i| format!("{}_{i}", config.name)).collect()
    }
}

/// Files emitted for one record.
#[derive(Debug, Clone)]
pub struct Emitted {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub runs: Vec<(Simulated, Emitted)>,
}

impl RunOutcome {
    pub fn status(&self) -> Status {
        self.runs.iter().fold(Status::Clean, |acc, (s, _)| acc.worst(s.status()))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|e| RunError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

/// Simulate every initial velocity of `config` and write its files into
/// `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let dir = PathBuf::from(&config.output_dir);
    ensure_dir(&dir)?;
    let mut runs = Vec::with_capacity(config.v0.len());
    for (v0, stem) in config.v0.iter().zip(stems(config)) {
        let sim = simulate(config, *v0)?;
        let csv_name = format!("{stem}.csv");
        let emitted = Emitted {
            csv: dir.join(&csv_name),
            sidecar: dir.join(format!("{stem}.json")),
        };
        write_file(&emitted.csv, &render_csv(config, &sim))?;
        write_file(&emitted.sidecar, &render_sidecar(config, &sim, &csv_name))?;
        runs.push((sim, emitted));
    }
    Ok(RunOutcome { runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        for x in [0.1, -3.2e-7, 1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE] {
            let text = fmt_num(x);
            assert_eq!(text.parse::<f64>().unwrap(), x);
            let mantissa = text.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn status_ordering() {
        assert_eq!(Status::Clean.worst(Status::Truncated), Status::Truncated);
        assert_eq!(Status::Error.worst(Status::Truncated), Status::Error);
        assert_eq!(Status::Truncated.code(), 2);
    }

    #[test]
    fn short_ring_run_is_clean_and_has_header() {
        let c = parse_config("model = \"ring\"\nt_end = 0.1\nsolver.dt = 0.01").unwrap();
        let sim = simulate(&c, 0.0).unwrap();
        assert_eq!(sim.status(), Status::Clean);
        let text = String::from_utf8(render_csv(&c, &sim)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RING_HEADER);
        assert_eq!(lines.count(), 11);
        assert!(!text.contains('\r'));
    }
}
