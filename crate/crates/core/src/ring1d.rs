//! 1+1D ring of circumference `L = a·l` filled with a conformal scalar field.
//!
//! The regularized field energy is `H = −L̇²/(24πL) − π/(6L)`: a static
//! Casimir potential plus a velocity-dependent term coming from the
//! second-adiabatic-order density `ρ⁽²⁾ = ȧ²/(24πa²)`. Treating the ring as a
//! classical body of mass `M` gives the effective Lagrangian
//! `½ML̇² − L̇²/(24πL) + π/(6L)`, whose Euler–Lagrange equation
//!
//! ```text
//! (M − 1/(12πL)) L̈ = −π/(6L²) − L̇²/(24πL²)
//! ```
//!
//! is compared here against pure Casimir dynamics `M L̈ = −π/(6L²)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numkit::{self, extrapolate_to_zero, Domain, OdeOptions, OdeProblem, QuadSpec, Termination};
use crate::record::{Diagnostics, EnergyBreakdown, HaltReason, MirrorState, Sample, SimulationRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    /// Mass `M` of the ring.
    pub mass: f64,
    /// Coordinate circumference `l`.
    pub l: f64,
    /// Field mass, used only while regularizing.
    pub field_mass: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            l: 1.0,
            field_mass: 0.0,
        }
    }
}

impl RingParams {
    pub fn new(mass: f64) -> Result<Self> {
        let p = Self { mass, ..Self::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(format!("ring mass must be positive, got {}", self.mass)));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!("ring circumference must be positive, got {}", self.l)));
        }
        if !(self.field_mass >= 0.0) {
            return Err(Error::invalid("field mass must be non-negative"));
        }
        Ok(())
    }

    /// Length `L* = 1/(12πM)` where the backreaction effective mass vanishes.
    pub fn critical_length(&self) -> f64 {
        1.0 / (12.0 * PI * self.mass)
    }
}

/// Scale factor and its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingKinematics {
    pub a: f64,
    pub a_dot: f64,
    pub a_ddot: f64,
}

impl RingKinematics {
    pub fn new(a: f64, a_dot: f64, a_ddot: f64) -> Self {
        Self { a, a_dot, a_ddot }
    }

    pub fn from_length(length: f64, velocity: f64, accel: f64, l: f64) -> Self {
        Self::new(length / l, velocity / l, accel / l)
    }

    pub fn hubble(&self) -> f64 {
        self.a_dot / self.a
    }
}

/// Instantaneous and adiabatic frequencies of a single mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticFrequency {
    pub k: f64,
    pub omega: f64,
    pub omega_dot: f64,
    pub omega_ddot: f64,
    pub sigma: f64,
}

impl AdiabaticFrequency {
    /// `w_k² = ω_k² + σ`, the exact mode-equation frequency squared.
    pub fn w_squared(&self) -> f64 {
        self.omega * self.omega + self.sigma
    }

    /// Second-order adiabatic frequency
    /// `W = ω − (ω̈/ω − (3/2)ω̇²/ω² − 2σ)/(4ω)`.
    pub fn wkb(&self) -> f64 {
        let (w, wd, wdd) = (self.omega, self.omega_dot, self.omega_ddot);
        w - (wdd / w - 1.5 * wd * wd / (w * w) - 2.0 * self.sigma) / (4.0 * w)
    }

    /// Slowness `ε = 1/(ω T)` for an externally supplied timescale `T`.
    pub fn slowness(&self, timescale: f64) -> f64 {
        1.0 / (self.omega * timescale)
    }
}

/// `ω_k = √(k²/a² + m²)` with its analytic time derivatives.
pub fn mode_frequency(k: f64, kin: &RingKinematics, m: f64) -> Result<AdiabaticFrequency> {
    if !(kin.a > 0.0) {
        return Err(Error::invalid("scale factor must be positive"));
    }
    if k == 0.0 && m == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let RingKinematics { a, a_dot, a_ddot } = *kin;
    let k2 = k * k;
    let omega = (k2 / (a * a) + m * m).sqrt();
    let omega_dot = -k2 * a_dot / (a * a * a * omega);
    let omega_ddot = -k2 * (a_ddot / (a.powi(3) * omega) - 3.0 * a_dot * a_dot / (a.powi(4) * omega) - a_dot * omega_dot / (a.powi(3) * omega * omega));
    Ok(AdiabaticFrequency {
        k,
        omega,
        omega_dot,
        omega_ddot,
        sigma: sigma_term(kin),
    })
}

/// `σ = −½(ä/a − ȧ²/(2a²))`.
pub fn sigma_term(kin: &RingKinematics) -> f64 {
    let RingKinematics { a, a_dot, a_ddot } = *kin;
    -0.5 * (a_ddot / a - a_dot * a_dot / (2.0 * a * a))
}

pub fn wkb_frequency(k: f64, kin: &RingKinematics, m: f64) -> Result<f64> {
    mode_frequency(k, kin, m).map(|f| f.wkb())
}

/// Second-adiabatic-order energy density at wave number `k`.
pub fn rho2_integrand(k: f64, kin: &RingKinematics, m: f64) -> Result<f64> {
    let f = mode_frequency(k, kin, m)?;
    let h = kin.a_dot / (2.0 * kin.a);
    let (w, wd) = (f.omega, f.omega_dot);
    Ok((h * h / w + h * wd / (w * w) + 0.25 * wd * wd / w.powi(3)) / (8.0 * PI * kin.a))
}

/// `∫ dk ρ_k⁽²⁾` over the real line, evaluated by quadrature at field mass `m > 0`.
pub fn rho2_quadrature(kin: &RingKinematics, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::invalid(
            "rho2_quadrature needs a positive field mass; the massless integrand vanishes identically",
        ));
    }
    if kin.a_dot == 0.0 {
        return Ok(0.0);
    }
    // k = a·m·u puts the peak of the integrand at u ~ 1
    let scale = kin.a * m;
    let f = |u: f64| scale * rho2_integrand(scale * u, kin, m).unwrap_or(f64::NAN);
    let spec = QuadSpec::new(f, Domain::FullLine).tolerances(1e-300, 1e-11);
    numkit::quad_adaptive(&spec)
}

/// `ρ⁽²⁾ = ȧ²/(24πa²)`.
pub fn rho2_closed(kin: &RingKinematics) -> f64 {
    let h = kin.hubble();
    h * h / (24.0 * PI)
}

/// Result of the cutoff-regularized Casimir sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CasimirEstimate {
    pub value: f64,
    pub spread: f64,
    /// `(λ, ρ(λ))` before extrapolation.
    pub raw: Vec<(f64, f64)>,
}

/// Cutoffs `λ = z/Δ` with `Δ = 2π/(a²l)` the spacing of `ω_k/a`, for
/// `z = 0.8, 0.4, 0.2, 0.1`.
pub fn default_lambda_seq(kin: &RingKinematics, l: f64) -> Vec<f64> {
    let spacing = 2.0 * PI / (kin.a * kin.a * l);
    [0.8, 0.4, 0.2, 0.1].iter().map(|z| z / spacing).collect()
}

/// Static Casimir density from the exponentially cut-off massless mode sum
/// minus its continuum counterpart, extrapolated to zero cutoff:
///
/// `ρ(λ) = (1/al)[Σ_{n≥0} ω_k e^{−λω_k/a} − (l/2π)∫₀^∞ dk ω_k e^{−λω_k/a}]`,
/// `ω_k = k/a`, `k = 2πn/l`.
pub fn casimir_density_numeric(kin: &RingKinematics, l: f64, lambda_seq: &[f64], rel_tol: f64) -> Result<CasimirEstimate> {
    if !(kin.a > 0.0 && l > 0.0) {
        return Err(Error::invalid("a and l must be positive"));
    }
    if lambda_seq.len() < 3 {
        return Err(Error::invalid("need at least three cutoff values"));
    }
    if lambda_seq.iter().any(|&x| !(x > 0.0)) || lambda_seq.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("cutoffs must be positive and strictly decreasing"));
    }
    let a = kin.a;
    let mut raw = Vec::with_capacity(lambda_seq.len());
    for &lambda in lambda_seq {
        let sum = cutoff_mode_sum(a, l, lambda);
        // ∫dk (k/a) e^{−λk/a²} with k = a²x/λ
        let x_integral = numkit::quad_adaptive(&QuadSpec::new(|x: f64| x * (-x).exp(), Domain::UpperHalf(0.0)).tolerances(1e-16, 1e-14))?;
        let continuum = l / (2.0 * PI) * a.powi(3) / (lambda * lambda) * x_integral;
        raw.push((lambda, (sum - continuum) / (a * l)));
    }
    let xs: Vec<f64> = raw.iter().map(|(lam, _)| lam * lam).collect();
    let ys: Vec<f64> = raw.iter().map(|(_, v)| *v).collect();
    let ex = extrapolate_to_zero(&xs, &ys);
    if !(ex.spread <= rel_tol * ex.value.abs()) {
        return Err(Error::ExtrapolationUnstable {
            spread: ex.spread,
            tol: rel_tol * ex.value.abs(),
        });
    }
    Ok(CasimirEstimate {
        value: ex.value,
        spread: ex.spread,
        raw,
    })
}

/// `Σ_{n≥1} ω_n e^{−λω_n/a}`, truncated once terms drop below machine
/// precision relative to the partial sum. The n = 0 mode carries zero
/// frequency and is skipped.
fn cutoff_mode_sum(a: f64, l: f64, lambda: f64) -> f64 {
    let dk = 2.0 * PI / l;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut n = 1u64;
    loop {
        let omega = n as f64 * dk / a;
        let term = omega * (-lambda * omega / a).exp();
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        // past the maximum of x e^{−x} the terms decrease monotonically
        if lambda * omega / a > 1.0 && term < f64::EPSILON * 1e-3 * sum {
            break;
        }
        n += 1;
    }
    sum
}

/// `−π/(6a²l²)`.
pub fn casimir_density_closed(kin: &RingKinematics, l: f64) -> f64 {
    -PI / (6.0 * kin.a * kin.a * l * l)
}

/// Regularized field energy `H = −L̇²/(24πL) − π/(6L)`.
pub fn field_energy(length: f64, velocity: f64) -> f64 {
    -velocity * velocity / (24.0 * PI * length) - PI / (6.0 * length)
}

/// Effective Lagrangian of the ring.
pub fn lagrangian(params: &RingParams, length: f64, velocity: f64, with_backreaction: bool) -> f64 {
    let anomaly = if with_backreaction {
        -velocity * velocity / (24.0 * PI * length)
    } else {
        0.0
    };
    0.5 * params.mass * velocity * velocity + anomaly + PI / (6.0 * length)
}

/// Conserved energy `½ML̇² [− L̇²/(24πL)] − π/(6L)`.
pub fn energy(params: &RingParams, length: f64, velocity: f64, with_backreaction: bool) -> EnergyBreakdown {
    let kinetic = 0.5 * params.mass * velocity * velocity;
    let casimir = -PI / (6.0 * length);
    let anomaly_kinetic = if with_backreaction {
        -velocity * velocity / (24.0 * PI * length)
    } else {
        0.0
    };
    EnergyBreakdown {
        kinetic,
        casimir,
        anomaly_kinetic,
        creation: 0.0,
        total: kinetic + anomaly_kinetic + casimir,
    }
}

/// `L̈` from either equation of motion.
pub fn ring_accel(state: &MirrorState, params: &RingParams, with_backreaction: bool) -> Result<f64> {
    let (l, v) = (state.length, state.velocity);
    if !(l > 0.0) {
        return Err(Error::invalid(format!("ring length must be positive, got {l}")));
    }
    if !with_backreaction {
        return Ok(-PI / (6.0 * params.mass * l * l));
    }
    let critical = params.critical_length();
    if l <= critical {
        return Err(Error::CriticalLength { length: l, critical });
    }
    let m_eff = params.mass - 1.0 / (12.0 * PI * l);
    Ok(backreaction_force(l, v) / m_eff)
}

fn backreaction_force(l: f64, v: f64) -> f64 {
    -PI / (6.0 * l * l) - v * v / (24.0 * PI * l * l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingRunOptions {
    pub tol: f64,
    pub dense_dt: f64,
}

impl Default for RingRunOptions {
    fn default() -> Self {
        Self { tol: 1e-10, dense_dt: 1e-3 }
    }
}

/// Halting length relative to `L*` for backreaction runs.
pub const CRITICAL_MARGIN: f64 = 1e-6;
/// Collapse floor for runs without backreaction.
pub const COLLAPSE_FLOOR: f64 = 1e-6;

/// Integrate the ring from `(L0, V0)` at t = 0 to `t_end`.
///
/// The state is carried as `(L − L*, L̇)` so that relative error control
/// stays meaningful as the length approaches the critical value (`L* = 0`
/// without backreaction).
pub fn simulate_ring(params: &RingParams, ic: (f64, f64), t_end: f64, with_backreaction: bool, opts: &RingRunOptions) -> Result<SimulationRecord> {
    params.validate()?;
    let (l0, v0) = ic;
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end must be positive"));
    }
    let critical = if with_backreaction { params.critical_length() } else { 0.0 };
    let floor = if with_backreaction { CRITICAL_MARGIN * critical } else { COLLAPSE_FLOOR };
    if !(l0 - critical > floor) {
        return Err(Error::CriticalLength { length: l0, critical });
    }
    let mass = params.mass;
    let accel = move |offset: f64, v: f64| -> Result<f64> {
        let l = offset + critical;
        if with_backreaction {
            if !(offset > 0.0) {
                return Err(Error::CriticalLength { length: l, critical });
            }
            // M − 1/(12πL) = M·(L − L*)/L without cancellation
            let m_eff = mass * offset / l;
            Ok(backreaction_force(l, v) / m_eff)
        } else {
            if !(l > 0.0) {
                return Err(Error::invalid("ring length became non-positive"));
            }
            Ok(-PI / (6.0 * mass * l * l))
        }
    };
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        dy[0] = y[1];
        dy[1] = accel(y[0], y[1])?;
        Ok(())
    };
    let problem = OdeProblem::new(rhs, 0.0, t_end, vec![l0 - critical, v0]);
    let base = OdeOptions::with_tol(opts.tol).dense(opts.dense_dt);
    let ode_opts = OdeOptions {
        atol: base.rtol * 1e-12,
        ..base
    };
    let sol = numkit::solve(&problem, &ode_opts, Some(move |_t: f64, y: &[f64]| y[0] - floor));
    let halt = match &sol.termination {
        Termination::Reached => HaltReason::Completed,
        Termination::Event { .. } if with_backreaction => HaltReason::CriticalLength,
        Termination::Event { .. } => HaltReason::Collapsed,
        Termination::Failed(Error::StepUnderflow { t, .. }) => HaltReason::StepUnderflow { t: *t },
        Termination::Failed(e) => HaltReason::Failed(e.to_string()),
    };
    let tr = &sol.trajectory;
    let mut samples = Vec::with_capacity(tr.len());
    for (t, y) in tr.t.iter().zip(&tr.y) {
        let (offset, v) = (y[0], y[1]);
        let length = offset + critical;
        let acc = accel(offset, v).unwrap_or(f64::NAN);
        let mut e = energy(params, length, v, with_backreaction);
        if with_backreaction {
            // ½(M − 1/(12πL))L̇² evaluated through the offset
            e.total = 0.5 * mass * offset / length * v * v - PI / (6.0 * length);
        }
        samples.push(Sample {
            state: MirrorState::new(*t, length, v),
            accel: acc,
            energy: e,
        });
    }
    let e0 = samples[0].energy.total;
    let drift = samples.iter().map(|s| (s.energy.total - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
    Ok(SimulationRecord {
        samples,
        halt,
        diagnostics: Diagnostics {
            energy_drift: Some(drift),
            accepted_steps: tr.stats.accepted,
            rejected_steps: tr.stats.rejected,
        },
    })
}

/// Largest discrete Euler–Lagrange residual `|d/dt(∂𝓛/∂L̇) − ∂𝓛/∂L|` over
/// the interior of the uniformly sampled part of `record`, with every
/// derivative taken by central differences of the recorded lengths.
pub fn el_residual(record: &SimulationRecord, params: &RingParams, with_backreaction: bool, dt: f64) -> Result<f64> {
    let s = record.uniform_prefix(dt);
    if s.len() < 3 {
        return Err(Error::invalid("el_residual needs at least three uniformly spaced samples"));
    }
    let len: Vec<f64> = s.iter().map(|x| x.state.length).collect();
    let h = dt;
    let momentum = |l: f64, v: f64| {
        if with_backreaction {
            (params.mass - 1.0 / (12.0 * PI * l)) * v
        } else {
            params.mass * v
        }
    };
    let force = |l: f64, v: f64| {
        let anomaly = if with_backreaction { v * v / (24.0 * PI * l * l) } else { 0.0 };
        anomaly - PI / (6.0 * l * l)
    };
    let half_momentum = |i: usize| momentum(0.5 * (len[i] + len[i + 1]), (len[i + 1] - len[i]) / h);
    let mut worst: f64 = 0.0;
    for i in 1..len.len() - 1 {
        let dp = (half_momentum(i) - half_momentum(i - 1)) / h;
        let v = (len[i + 1] - len[i - 1]) / (2.0 * h);
        worst = worst.max((dp - force(len[i], v)).abs());
    }
    Ok(worst)
}
