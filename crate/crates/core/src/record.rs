//! Time-series records shared by the ring and box simulators.

use std::fmt;

/// Length and velocity of the moving boundary at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorState {
    pub t: f64,
    pub length: f64,
    pub velocity: f64,
}

impl MirrorState {
    pub fn new(t: f64, length: f64, velocity: f64) -> Self {
        Self { t, length, velocity }
    }
}

/// Per-instant energy decomposition. Components that do not apply to a model
/// are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// Mirror kinetic energy `½ M L̇²`.
    pub kinetic: f64,
    /// Static Casimir energy (ring only).
    pub casimir: f64,
    /// Trace-anomaly kinetic term `−L̇²/(24πL)` (ring only).
    pub anomaly_kinetic: f64,
    /// Particle-creation energy `E_creation` (box only).
    pub creation: f64,
    /// The quantity conserved (ring) or tracked (box) by the dynamics.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: MirrorState,
    pub accel: f64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HaltReason {
    Completed,
    /// Reached `(1 + 1e−6)·L*` where the effective mass vanishes.
    CriticalLength,
    /// Length dropped to the collapse floor.
    Collapsed,
    StepUnderflow {
        t: f64,
    },
    EffectiveMassSingular {
        t: f64,
    },
    Failed(String),
}

impl HaltReason {
    pub fn is_clean(&self) -> bool {
        matches!(self, HaltReason::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            HaltReason::Completed => "completed",
            HaltReason::CriticalLength => "critical_length",
            HaltReason::Collapsed => "collapsed",
            HaltReason::StepUnderflow { .. } => "step_underflow",
            HaltReason::EffectiveMassSingular { .. } => "effective_mass_singular",
            HaltReason::Failed(_) => "failed",
        }
    }
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReason::StepUnderflow { t } => write!(f, "step underflow at t = {t}"),
            HaltReason::EffectiveMassSingular { t } => write!(f, "effective mass singular at t = {t}"),
            HaltReason::Failed(msg) => write!(f, "failed: {msg}"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    /// max |E(t) − E(t₀)| / |E(t₀)| of the conserved energy, when one exists.
    pub energy_drift: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub samples: Vec<Sample>,
    pub halt: HaltReason,
    pub diagnostics: Diagnostics,
}

impl SimulationRecord {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.state.t)
    }

    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.state.length)
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Linear interpolation of the length at `t`, if `t` is covered.
    pub fn length_at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        let i = s.partition_point(|x| x.state.t < t);
        if i == 0 {
            return (s.first()?.state.t == t).then(|| s[0].state.length);
        }
        if i == s.len() {
            return None;
        }
        let (a, b) = (&s[i - 1].state, &s[i].state);
        let w = (t - a.t) / (b.t - a.t);
        Some(a.length + w * (b.length - a.length))
    }

    /// Samples lying on the uniform output grid (drops a trailing off-grid
    /// halt point).
    pub fn uniform_prefix(&self, dt: f64) -> &[Sample] {
        let s = &self.samples;
        if s.len() < 2 {
            return s;
        }
        let t0 = s[0].state.t;
        let n = s
            .iter()
            .enumerate()
            .take_while(|(j, x)| ((x.state.t - t0) - *j as f64 * dt).abs() <= 1e-9 * dt.max(1.0))
            .count();
        &s[..n]
    }
}
