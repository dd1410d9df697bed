//! 3+1D box with one moving face (symmetric Bianchi-I, `a₂ = a₃ = 1`).
//!
//! Conformal variables `χ = a^{1/3}φ`, `dη = a^{−1/3}dt` turn the mode
//! equation into a parametric oscillator with frequency
//! `Ω² = a^{2/3}(k_x²/a² + k_yz² + m²)` and anisotropy `Q = (a′/a)²/9`.
//! Particles are created mainly by modes inside the nonadiabatic ellipsoid
//! `k_yz² + (k_x/a)² ≤ 1/t²`; their energy drives the face through the
//! Lagrangian `½mL̇² + E_creation(L, L̇, t)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modes::ModeBackground;
use crate::numkit::{self, fd_partial, Domain, OdeOptions, OdeProblem, Order, QuadSpec, Termination};
use crate::record::{Diagnostics, EnergyBreakdown, HaltReason, MirrorState, Sample, SimulationRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams {
    /// Coordinate side length `l`.
    pub l: f64,
    /// Mirror mass `m`.
    pub mirror_mass: f64,
    /// Initial time `t₀ > 0`, where `a(t₀) = 1`.
    pub t0: f64,
    /// Field mass; zero in the model, kept for regression runs.
    pub field_mass: f64,
}

impl Default for BoxParams {
    fn default() -> Self {
        Self {
            l: 50.0,
            mirror_mass: 10.0,
            t0: 1.0,
            field_mass: 0.0,
        }
    }
}

impl BoxParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!("box side must be positive, got {}", self.l)));
        }
        if !(self.mirror_mass > 0.0 && self.mirror_mass.is_finite()) {
            return Err(Error::invalid(format!("mirror mass must be positive, got {}", self.mirror_mass)));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::invalid(format!("t0 must be positive, got {}", self.t0)));
        }
        if !(self.field_mass >= 0.0) {
            return Err(Error::invalid("field mass must be non-negative"));
        }
        Ok(())
    }

    /// `L₀ = a₀·l` with `a₀ = 1`.
    pub fn initial_length(&self) -> f64 {
        self.l
    }
}

/// Scale factor with its cosmic- and conformal-time rates. The conformal
/// rate is derived, never supplied, so `a′ = a^{1/3}ȧ` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxKinematics {
    a: f64,
    a_dot: f64,
    a_prime: f64,
}

impl BoxKinematics {
    pub fn new(a: f64, a_dot: f64) -> Self {
        Self {
            a,
            a_dot,
            a_prime: a.cbrt() * a_dot,
        }
    }

    pub fn from_length(length: f64, velocity: f64, l: f64) -> Self {
        Self::new(length / l, velocity / l)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn a_dot(&self) -> f64 {
        self.a_dot
    }

    /// `da/dη`
    pub fn a_prime(&self) -> f64 {
        self.a_prime
    }

    /// `Q = (a′/a)²/9`
    pub fn q(&self) -> f64 {
        q_anisotropy(self)
    }
}

pub fn q_anisotropy(kin: &BoxKinematics) -> f64 {
    let r = kin.a_prime / kin.a;
    r * r / 9.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KVector {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl KVector {
    pub fn new(kx: f64, ky: f64, kz: f64) -> Self {
        Self { kx, ky, kz }
    }

    /// Box mode `k_i = 2πn_i/l`.
    pub fn from_indices(n: [i32; 3], l: f64) -> Self {
        let s = 2.0 * PI / l;
        Self::new(s * n[0] as f64, s * n[1] as f64, s * n[2] as f64)
    }

    pub fn kyz(&self) -> f64 {
        self.ky.hypot(self.kz)
    }
}

/// `Ω = a^{1/3}√(k_x²/a² + k_yz² + m²)` and its value `Ω₀` at `a = 1`.
pub fn omega_conformal(k: &KVector, a: f64, m: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return Err(Error::invalid("scale factor must be positive"));
    }
    let kyz2 = k.ky * k.ky + k.kz * k.kz;
    let omega0 = (k.kx * k.kx + kyz2 + m * m).sqrt();
    if omega0 == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let omega = a.cbrt() * ((k.kx / a).powi(2) + kyz2 + m * m).sqrt();
    Ok((omega, omega0))
}

/// Membership in `R(t)`: `k_yz² + (k_x/a)² ≤ 1/t²` (boundary included).
pub fn in_region(k: &KVector, a: f64, t: f64) -> bool {
    let kyz2 = k.ky * k.ky + k.kz * k.kz;
    (kyz2 + (k.kx / a).powi(2)) * t * t <= 1.0
}

/// `η(t) = ∫_{t₀}^{t} a(s)^{−1/3} ds`.
pub fn conformal_time_map<A: Fn(f64) -> f64>(a: A, t0: f64, t: f64) -> Result<f64> {
    if t == t0 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if t > t0 { (t0, t, 1.0) } else { (t, t0, -1.0) };
    let f = |s: f64| {
        let v = a(s);
        if v > 0.0 {
            1.0 / v.cbrt()
        } else {
            f64::NAN
        }
    };
    let spec = QuadSpec::new(f, Domain::Finite(lo, hi)).tolerances(1e-14, 1e-12);
    Ok(sign * numkit::quad_adaptive(&spec)?)
}

/// Default half-width in `a` of the Taylor patch of [`pee`] around `a = 1`.
pub const PEE_TAYLOR_HALFWIDTH: f64 = 1e-4;

/// `𝒫(a)`: `arcsin(√(1−a²))·a/√(1−a²)` for `a < 1`,
/// `log((√(1−a⁻²)+1)a)/√(1−a⁻²)` for `a > 1` and 1 at `a = 1`.
/// Returns NaN for `a ≤ 0`.
pub fn pee(a: f64) -> f64 {
    pee_with_patch(a, PEE_TAYLOR_HALFWIDTH)
}

pub fn pee_with_patch(a: f64, halfwidth: f64) -> f64 {
    a * pee_reduced(a * a - 1.0, (a - 1.0).abs() < halfwidth)
}

// Taylor coefficients of F(x) = Σ (−1)ⁿ(2n)!/(4ⁿ(n!)²(2n+1)) xⁿ.
const PEE_SERIES: [f64; 6] = [1.0, -1.0 / 6.0, 3.0 / 40.0, -5.0 / 112.0, 35.0 / 1152.0, -63.0 / 2816.0];

/// `𝒫(a) = a·F(a² − 1)` with `F(x) = arsinh(√x)/√x`, continued to
/// `arcsin(√−x)/√−x` for `x < 0`.
fn pee_reduced(x: f64, taylor: bool) -> f64 {
    if taylor || x == 0.0 {
        PEE_SERIES.iter().rev().fold(0.0, |acc, c| acc * x + c)
    } else if x > 0.0 {
        let y = x.sqrt();
        y.asinh() / y
    } else {
        let y = (-x).sqrt();
        y.asin() / y
    }
}

/// `d𝒫/da = F + 2a²F′(x)` with `F′(x) = (1/a − F)/(2x)`.
pub fn pee_derivative(a: f64) -> f64 {
    let x = a * a - 1.0;
    let taylor = (a - 1.0).abs() < PEE_TAYLOR_HALFWIDTH;
    let f = pee_reduced(x, taylor);
    let f_prime = if taylor || x == 0.0 {
        PEE_SERIES.iter().enumerate().skip(1).rev().fold(0.0, |acc, (n, c)| acc * x + n as f64 * c)
    } else {
        (1.0 / a - f) / (2.0 * x)
    };
    f + 2.0 * a * a * f_prime
}

/// Which form of the creation density is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormConvention {
    /// The closed form as printed, anisotropy term `∝ a′²𝒫t³`, with the
    /// integral's printed prefactor `1/(8π³a^{4/3})`.
    Published,
    /// Mode-sum normalization `1/(32π³a^{4/3})` and anisotropy term
    /// `∝ a′²𝒫t²`; closed form and integral then coincide.
    Reconciled,
}

/// Time variable entering `R(t)` and the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeVariable {
    /// Cosmic time `t`.
    Cosmic,
    /// `t₀ + η(t)` with `dη = a^{−1/3}dt`.
    Conformal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreationEnergyModel {
    pub convention: ClosedFormConvention,
    pub time_variable: TimeVariable,
    pub quad_abs_tol: f64,
    pub quad_rel_tol: f64,
}

impl Default for CreationEnergyModel {
    fn default() -> Self {
        Self {
            convention: ClosedFormConvention::Published,
            time_variable: TimeVariable::Cosmic,
            quad_abs_tol: 1e-13,
            quad_rel_tol: 1e-9,
        }
    }
}

impl CreationEnergyModel {
    pub fn with_convention(convention: ClosedFormConvention) -> Self {
        Self { convention, ..Self::default() }
    }

    fn integral_prefactor(&self) -> f64 {
        match self.convention {
            ClosedFormConvention::Published => 1.0 / (8.0 * PI.powi(3)),
            ClosedFormConvention::Reconciled => 1.0 / (32.0 * PI.powi(3)),
        }
    }

    /// Power `p` of `t` in the anisotropy term `−4a′²𝒫t^p` of the bracket.
    fn anisotropy_power(&self) -> i32 {
        match self.convention {
            ClosedFormConvention::Published => 3,
            ClosedFormConvention::Reconciled => 2,
        }
    }
}

/// Creation density split into its isotropic part and the part linear in `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreationParts {
    pub isotropic: f64,
    pub anisotropic: f64,
}

impl CreationParts {
    pub fn total(&self) -> f64 {
        self.isotropic + self.anisotropic
    }
}

/// Brute-force `ρ_creation`: the integral of `(Ω² − Q)/Ω₀ + Ω₀ − 2Ω` over
/// `R(t)` in cylindrical coordinates `(k_x, k_yz)`, with `k_x = a·u` so the
/// region becomes the disk `u² + k_yz² ≤ 1/t²`.
pub fn rho_creation_quadrature_parts(kin: &BoxKinematics, t: f64, model: &CreationEnergyModel, field_mass: f64) -> Result<CreationParts> {
    if !(t > 0.0 && kin.a > 0.0) {
        return Err(Error::invalid("rho_creation needs t > 0 and a > 0"));
    }
    let a = kin.a;
    let m2 = field_mass * field_mass;
    let a13 = a.cbrt();
    let radius = 1.0 / t;
    let scale = model.integral_prefactor() / a.powf(4.0 / 3.0) * 2.0 * PI * a;
    let (atol, rtol) = (model.quad_abs_tol, model.quad_rel_tol);
    let iso = move |u: f64, r: f64| {
        let omega = a13 * (u * u + r * r + m2).sqrt();
        let omega0 = ((a * u).powi(2) + r * r + m2).sqrt();
        if omega0 == 0.0 {
            return 0.0;
        }
        (omega * omega / omega0 + omega0 - 2.0 * omega) * r
    };
    let aniso = move |u: f64, r: f64| {
        let omega0 = ((a * u).powi(2) + r * r + m2).sqrt();
        if omega0 == 0.0 {
            return 0.0;
        }
        -r / omega0
    };
    let disk = |g: &dyn Fn(f64, f64) -> f64| -> Result<f64> {
        let outer = |u: f64| {
            let rmax = (radius * radius - u * u).max(0.0).sqrt();
            let spec = QuadSpec::new(|r: f64| g(u, r), Domain::Finite(0.0, rmax)).tolerances(atol * 1e-2, rtol * 1e-2);
            numkit::quad_adaptive(&spec).unwrap_or(f64::NAN)
        };
        // the integrand is even in u
        let spec = QuadSpec::new(outer, Domain::Finite(0.0, radius)).tolerances(atol, rtol);
        Ok(2.0 * numkit::quad_adaptive(&spec)?)
    };
    let isotropic = scale * disk(&iso)?;
    let q = kin.q();
    let anisotropic = if q == 0.0 { 0.0 } else { scale * q * disk(&aniso)? };
    Ok(CreationParts { isotropic, anisotropic })
}

pub fn rho_creation_quadrature(kin: &BoxKinematics, t: f64, model: &CreationEnergyModel) -> Result<f64> {
    rho_creation_quadrature_parts(kin, t, model, 0.0).map(|p| p.total())
}

/// Closed form
/// `(576π²a^{10/3}t⁴)^{−1}[9a⁴ − 36a^{10/3} + 18a^{8/3}𝒫 + 9a²𝒫 − 4a′²𝒫t^p]`
/// with `p = 3` as published or `p = 2` reconciled.
pub fn rho_creation_closed_parts(kin: &BoxKinematics, t: f64, model: &CreationEnergyModel) -> CreationParts {
    let a = kin.a;
    let p = pee(a);
    let denom = 576.0 * PI * PI * a.powf(10.0 / 3.0) * t.powi(4);
    let bracket = 9.0 * a.powi(4) - 36.0 * a.powf(10.0 / 3.0) + 18.0 * a.powf(8.0 / 3.0) * p + 9.0 * a * a * p;
    CreationParts {
        isotropic: bracket / denom,
        anisotropic: -4.0 * kin.a_prime * kin.a_prime * p * t.powi(model.anisotropy_power()) / denom,
    }
}

pub fn rho_creation_closed(kin: &BoxKinematics, t: f64, model: &CreationEnergyModel) -> f64 {
    rho_creation_closed_parts(kin, t, model).total()
}

/// `E_creation = L·l²·ρ_creation(a = L/l, ȧ = L̇/l, t)` from the closed form.
pub fn creation_energy(length: f64, velocity: f64, t: f64, params: &BoxParams, model: &CreationEnergyModel) -> f64 {
    let l = params.l;
    let kin = BoxKinematics::from_length(length, velocity, l);
    length * l * l * rho_creation_closed(&kin, t, model)
}

/// Hand-derived partials of [`creation_energy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreationPartials {
    pub e_l: f64,
    pub e_v: f64,
    pub e_vv: f64,
    pub e_lv: f64,
    pub e_tv: f64,
}

/// With `a = L/l`, `E = l³B(a)/(64π²t⁴) − (l/144π²)V²t^{p−4}𝒫a^{−5/3}` and
/// `B = a^{5/3} − 4a + 2a^{1/3}𝒫 + a^{−1/3}𝒫`.
pub fn creation_partials(length: f64, velocity: f64, t: f64, params: &BoxParams, model: &CreationEnergyModel) -> CreationPartials {
    let l = params.l;
    let a = length / l;
    let v = velocity;
    let p = pee(a);
    let dp = pee_derivative(a);
    let pw = model.anisotropy_power() as f64 - 4.0;
    let tp = t.powf(pw);
    let c = l / (144.0 * PI * PI);
    let b_prime =
        5.0 / 3.0 * a.powf(2.0 / 3.0) - 4.0 + 2.0 / 3.0 * a.powf(-2.0 / 3.0) * p + 2.0 * a.cbrt() * dp - a.powf(-4.0 / 3.0) * p / 3.0 + a.powf(-1.0 / 3.0) * dp;
    let g = p * a.powf(-5.0 / 3.0);
    let g_prime = dp * a.powf(-5.0 / 3.0) - 5.0 / 3.0 * p * a.powf(-8.0 / 3.0);
    let e_iso_l = l * l * b_prime / (64.0 * PI * PI * t.powi(4));
    CreationPartials {
        e_l: e_iso_l - c * v * v * tp * g_prime / l,
        e_v: -2.0 * c * v * tp * g,
        e_vv: -2.0 * c * tp * g,
        e_lv: -2.0 * c * v * tp * g_prime / l,
        e_tv: -2.0 * c * v * pw * tp / t * g,
    }
}

/// Threshold on `|m + ∂²E/∂L̇²|` relative to `m`.
pub const EFFECTIVE_MASS_FLOOR: f64 = 1e-12;

/// Euler–Lagrange acceleration for `𝓛 = ½mL̇² + E(L, L̇, t)`:
/// `L̈ = [E_L − L̇E_LV − E_tV]/(m + E_VV)`, every partial by `fd_partial`.
/// `time_rate` scales the explicit time dependence (`dτ/dt` when `E`
/// depends on a time variable `τ` other than `t`).
pub fn el_accel<E: Fn(f64, f64, f64) -> f64>(energy: E, mass: f64, length: f64, velocity: f64, tau: f64, time_rate: f64) -> Result<f64> {
    let x = [length, velocity, tau];
    let f = |p: &[f64]| energy(p[0], p[1], p[2]);
    let e_v = |p: &[f64]| fd_partial(f, p, 1, Order::First);
    let e_l = fd_partial(f, &x, 0, Order::First);
    let e_vv = fd_partial(f, &x, 1, Order::Second);
    let e_lv = fd_partial(e_v, &x, 0, Order::First);
    let e_tv = fd_partial(e_v, &x, 2, Order::First) * time_rate;
    let m_eff = mass + e_vv;
    if !(m_eff.abs() >= EFFECTIVE_MASS_FLOOR * mass) {
        return Err(Error::EffectiveMassSingular(m_eff));
    }
    let acc = (e_l - velocity * e_lv - e_tv) / m_eff;
    if !acc.is_finite() {
        return Err(Error::NonFinite("box acceleration"));
    }
    Ok(acc)
}

/// `L̈` of the moving face at cosmic time `t`.
pub fn box_accel(state: &MirrorState, t: f64, params: &BoxParams, model: &CreationEnergyModel) -> Result<f64> {
    box_accel_at(state, t, 1.0, params, model)
}

/// As [`box_accel`] with the formula time `tau` and its rate `dτ/dt` given.
pub fn box_accel_at(state: &MirrorState, tau: f64, time_rate: f64, params: &BoxParams, model: &CreationEnergyModel) -> Result<f64> {
    if !(state.length > 0.0 && tau > 0.0) {
        return Err(Error::invalid("box acceleration needs L > 0 and t > 0"));
    }
    el_accel(
        |l, v, s| creation_energy(l, v, s, params, model),
        params.mirror_mass,
        state.length,
        state.velocity,
        tau,
        time_rate,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRunOptions {
    pub tol: f64,
    pub dense_dt: f64,
}

impl Default for BoxRunOptions {
    fn default() -> Self {
        Self { tol: 1e-10, dense_dt: 1e-2 }
    }
}

/// Default simulation window `[t₀, t_end]` end point.
pub const DEFAULT_T_END: f64 = 10.0;

/// Integrate the moving face from `(L0, V0)` at `t₀ = t_span.0` to `t_span.1`.
pub fn simulate_box(params: &BoxParams, ic: (f64, f64), t_span: (f64, f64), model: &CreationEnergyModel, opts: &BoxRunOptions) -> Result<SimulationRecord> {
    params.validate()?;
    let (t0, t1) = t_span;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::invalid("box window needs 0 < t0 < t_end"));
    }
    let (l0, v0) = ic;
    if !(l0 > 0.0) {
        return Err(Error::invalid("initial length must be positive"));
    }
    let p = *params;
    let m = *model;
    // state: L, L̇, η
    let formula_time = move |t: f64, eta: f64| match m.time_variable {
        TimeVariable::Cosmic => (t, 1.0),
        TimeVariable::Conformal => (t0 + eta, f64::NAN),
    };
    let accel = move |t: f64, y: &[f64]| -> Result<f64> {
        let (tau, rate) = formula_time(t, y[2]);
        let rate = if rate.is_nan() { (y[0] / p.l).cbrt().recip() } else { rate };
        box_accel_at(&MirrorState::new(t, y[0], y[1]), tau, rate, &p, &m)
    };
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        if !(y[0] > 0.0) {
            return Err(Error::invalid("box length became non-positive"));
        }
        dy[0] = y[1];
        dy[1] = accel(t, y)?;
        dy[2] = (y[0] / p.l).cbrt().recip();
        Ok(())
    };
    let problem = OdeProblem::new(rhs, t0, t1, vec![l0, v0, 0.0]);
    let sol = numkit::solve(&problem, &OdeOptions::with_tol(opts.tol).dense(opts.dense_dt), None::<fn(f64, &[f64]) -> f64>);
    let tr = &sol.trajectory;
    let halt = match &sol.termination {
        Termination::Reached => HaltReason::Completed,
        Termination::Event { .. } => HaltReason::Completed,
        Termination::Failed(Error::StepUnderflow { t, cause, .. }) => match cause {
            Some(c) if c.contains("effective mass") => HaltReason::EffectiveMassSingular { t: *t },
            _ => HaltReason::StepUnderflow { t: *t },
        },
        Termination::Failed(Error::EffectiveMassSingular(_)) => HaltReason::EffectiveMassSingular {
            t: tr.t.last().copied().unwrap_or(t0),
        },
        Termination::Failed(e) => HaltReason::Failed(e.to_string()),
    };
    let mut samples = Vec::with_capacity(tr.len());
    for (t, y) in tr.t.iter().zip(&tr.y) {
        let (tau, _) = formula_time(*t, y[2]);
        let creation = creation_energy(y[0], y[1], tau, &p, &m);
        let kinetic = 0.5 * p.mirror_mass * y[1] * y[1];
        samples.push(Sample {
            state: MirrorState::new(*t, y[0], y[1]),
            accel: accel(*t, y).unwrap_or(f64::NAN),
            energy: EnergyBreakdown {
                kinetic,
                creation,
                total: kinetic + creation,
                ..EnergyBreakdown::default()
            },
        });
    }
    Ok(SimulationRecord {
        samples,
        halt,
        diagnostics: Diagnostics {
            energy_drift: None,
            accepted_steps: tr.stats.accepted,
            rejected_steps: tr.stats.rejected,
        },
    })
}

/// `|Ė_matter(t₀)|·(t_end − t₀)` with `Ė_matter = −d/dt[½mL̇² + E_creation]`
/// estimated from the first three samples.
pub fn matter_energy_bound(record: &SimulationRecord) -> Result<f64> {
    let s = &record.samples;
    if s.len() < 3 {
        return Err(Error::invalid("matter_energy_bound needs at least three samples"));
    }
    let rate = initial_matter_rate(record)?;
    Ok(rate.abs() * (s[s.len() - 1].state.t - s[0].state.t))
}

/// `Ė_matter(t₀)` by the one-sided second-order difference
/// `−(−3E₀ + 4E₁ − E₂)/(2h)` on the first three samples.
pub fn initial_matter_rate(record: &SimulationRecord) -> Result<f64> {
    let s = &record.samples;
    if s.len() < 3 {
        return Err(Error::invalid("need at least three samples"));
    }
    let h = s[1].state.t - s[0].state.t;
    if !(h > 0.0) || ((s[2].state.t - s[1].state.t) - h).abs() > 1e-9 * h {
        return Err(Error::invalid("initial samples must be uniformly spaced"));
    }
    let e = |i: usize| s[i].energy.total;
    Ok(-(-3.0 * e(0) + 4.0 * e(1) - e(2)) / (2.0 * h))
}

/// `bound / max|E_creation|` over the record.
pub fn matter_bound_ratio(record: &SimulationRecord) -> Result<f64> {
    let bound = matter_energy_bound(record)?;
    let peak = record.samples.iter().map(|s| s.energy.creation.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(if bound == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(bound / peak)
}

/// Largest increase of `|L̇|` between consecutive samples (≤ 0 when the
/// speed never grows).
pub fn max_speed_increase(record: &SimulationRecord) -> f64 {
    record
        .samples
        .windows(2)
        .map(|w| w[1].state.velocity.abs() - w[0].state.velocity.abs())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lenz-law check: `|L̇(t)|` non-increasing up to `slack`.
pub fn speed_non_increasing(record: &SimulationRecord, slack: f64) -> bool {
    max_speed_increase(record) <= slack
}

/// A conformal mode sampled at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalMode {
    pub k: KVector,
    pub chi: Complex64,
    pub chi_prime: Complex64,
}

/// Bare truncated mode sum
/// `(1/2l³)a^{−4/3}Σ[|χ′|² + (Ω² − Q)|χ|²]`.
pub fn t00_mode_sum(modes: &[ConformalMode], kin: &BoxKinematics, l: f64) -> Result<f64> {
    let q = kin.q();
    let mut sum = 0.0;
    for mode in modes {
        let (omega, _) = omega_conformal(&mode.k, kin.a, 0.0)?;
        sum += mode.chi_prime.norm_sqr() + (omega * omega - q) * mode.chi.norm_sqr();
    }
    Ok(sum / (2.0 * l.powi(3) * kin.a.powf(4.0 / 3.0)))
}

/// Static adiabatic-vacuum modes `χ = e^{−iΩη}/√(2Ω)` at `η = 0` for all
/// nonzero `|n_i| ≤ n_max`.
pub fn vacuum_mode_bank(n_max: i32, l: f64, a: f64) -> Result<Vec<ConformalMode>> {
    let mut out = Vec::new();
    for nx in -n_max..=n_max {
        for ny in -n_max..=n_max {
            for nz in -n_max..=n_max {
                if (nx, ny, nz) == (0, 0, 0) {
                    continue;
                }
                let k = KVector::from_indices([nx, ny, nz], l);
                let (omega, _) = omega_conformal(&k, a, 0.0)?;
                let chi = Complex64::new((2.0 * omega).powf(-0.5), 0.0);
                out.push(ConformalMode {
                    k,
                    chi,
                    chi_prime: Complex64::new(0.0, -omega) * chi,
                });
            }
        }
    }
    Ok(out)
}

/// The frequency seen by mode `k` along a simulated face trajectory, in
/// cosmic time. `a` and `ȧ` come from cubic Hermite interpolation of the
/// recorded `(L, L̇)` and `(L̇, L̈)`.
#[derive(Debug, Clone)]
pub struct TrajectoryBackground<'a> {
    record: &'a SimulationRecord,
    l: f64,
    k: KVector,
    field_mass: f64,
}

impl<'a> TrajectoryBackground<'a> {
    pub fn new(record: &'a SimulationRecord, params: &BoxParams, k: KVector) -> Result<Self> {
        if record.samples.len() < 2 {
            return Err(Error::invalid("trajectory needs at least two samples"));
        }
        if record.samples.iter().any(|s| !s.accel.is_finite()) {
            return Err(Error::NonFinite("recorded acceleration"));
        }
        omega_conformal(&k, 1.0, params.field_mass)?;
        Ok(Self {
            record,
            l: params.l,
            k,
            field_mass: params.field_mass,
        })
    }

    pub fn span(&self) -> (f64, f64) {
        let s = &self.record.samples;
        (s[0].state.t, s[s.len() - 1].state.t)
    }

    /// `(a, ȧ)` at `t`.
    pub fn scale(&self, t: f64) -> (f64, f64) {
        let s = &self.record.samples;
        let i = s.partition_point(|x| x.state.t <= t).clamp(1, s.len() - 1);
        let (p, q) = (&s[i - 1], &s[i]);
        let h = q.state.t - p.state.t;
        let u = ((t - p.state.t) / h).clamp(0.0, 1.0);
        let length = hermite(u, h, p.state.length, p.state.velocity, q.state.length, q.state.velocity);
        let velocity = hermite(u, h, p.state.velocity, p.accel, q.state.velocity, q.accel);
        (length / self.l, velocity / self.l)
    }

    fn omega_cosmic(&self, a: f64) -> f64 {
        let k = &self.k;
        ((k.kx / a).powi(2) + k.ky * k.ky + k.kz * k.kz + self.field_mass * self.field_mass).sqrt()
    }
}

fn hermite(u: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * h * d0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * h * d1
}

impl ModeBackground for TrajectoryBackground<'_> {
    fn omega(&self, t: f64) -> f64 {
        let (a, _) = self.scale(t);
        a.cbrt() * self.omega_cosmic(a)
    }

    fn omega_prime(&self, t: f64) -> f64 {
        let (a, a_dot) = self.scale(t);
        let w = self.omega_cosmic(a);
        let dw_da = -self.k.kx * self.k.kx / (a.powi(3) * w);
        let d_omega_da = a.powf(-2.0 / 3.0) * w / 3.0 + a.cbrt() * dw_da;
        a.cbrt() * d_omega_da * a_dot
    }

    fn q(&self, t: f64) -> f64 {
        let (a, a_dot) = self.scale(t);
        BoxKinematics::new(a, a_dot).q()
    }

    fn deta_ds(&self, t: f64) -> f64 {
        self.scale(t).0.cbrt().recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_examples() {
        let (w, w0) = omega_conformal(&KVector::new(1.0, 2.0, 2.0), 1.0, 0.0).unwrap();
        assert!((w - 3.0).abs() < 1e-15 && (w0 - 3.0).abs() < 1e-15);
        let (w, _) = omega_conformal(&KVector::new(2.0, 0.0, 0.0), 8.0, 0.0).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        let (w, _) = omega_conformal(&KVector::new(0.0, 3.0, 0.0), 8.0, 0.0).unwrap();
        assert!((w - 6.0).abs() < 1e-14);
        assert_eq!(omega_conformal(&KVector::new(0.0, 0.0, 0.0), 2.0, 0.0), Err(Error::ZeroFrequency));
    }

    #[test]
    fn q_examples() {
        assert_eq!(BoxKinematics::new(3.0, 0.0).q(), 0.0);
        // a = 1, a′ = 3
        assert!((BoxKinematics::new(1.0, 3.0).q() - 1.0).abs() < 1e-15);
        let kin = BoxKinematics::new(8.0, 1.0);
        assert!((kin.a_prime() - 2.0).abs() < 1e-15);
        assert!((kin.q() - 1.0 / 144.0).abs() < 1e-17);
    }

    #[test]
    fn region_examples() {
        assert!(in_region(&KVector::new(0.0, 0.0, 0.0), 0.3, 100.0));
        assert!(in_region(&KVector::new(1.0, 0.0, 0.0), 1.0, 1.0));
        assert!(in_region(&KVector::new(2.0, 0.0, 0.0), 2.0, 1.0));
        assert!(!in_region(&KVector::new(2.1, 0.0, 0.0), 2.0, 1.0));
    }

    #[test]
    fn conformal_time_examples() {
        assert!((conformal_time_map(|_| 1.0, 1.0, 4.0).unwrap() - 3.0).abs() < 1e-13);
        let eta = conformal_time_map(|t: f64| (1.0 + t).powi(3), 0.0, 2.0).unwrap();
        assert!((eta - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pee_examples() {
        assert_eq!(pee(1.0), 1.0);
        assert!((pee(2.0) - 1.52069).abs() < 1e-5, "{}", pee(2.0));
        assert!((pee(0.5) - 0.60460).abs() < 1e-5, "{}", pee(0.5));
        // the printed branches, evaluated directly
        let a: f64 = 2.0;
        let s = (1.0 - a.powi(-2)).sqrt();
        assert!((pee(a) - ((s + 1.0) * a).ln() / s).abs() < 1e-14);
        let a: f64 = 0.5;
        let s = (a.powi(-2) - 1.0).sqrt();
        assert!((pee(a) - (s * a).asin() / s).abs() < 1e-14);
    }

    #[test]
    fn pee_is_continuous_at_one() {
        for a in [1.0 - 1e-6, 1.0 + 1e-6] {
            assert!((pee(a) - 1.0).abs() <= 1e-5);
        }
        for edge in [1.0 - PEE_TAYLOR_HALFWIDTH, 1.0 + PEE_TAYLOR_HALFWIDTH] {
            let series = pee_with_patch(edge, 2.0 * PEE_TAYLOR_HALFWIDTH);
            let branch = pee_with_patch(edge, 0.0);
            assert!((series - branch).abs() <= 1e-10, "{edge}: {series} vs {branch}");
        }
    }

    #[test]
    fn pee_derivative_matches_differences() {
        for a in [0.3, 0.8, 0.99995, 1.0, 1.00003, 1.2, 3.0] {
            let fd = numkit::derivative(|x| pee_with_patch(x, 0.0), a, Order::First);
            assert!((pee_derivative(a) - fd).abs() < 1e-6, "a={a}: {} vs {fd}", pee_derivative(a));
        }
    }

    #[test]
    fn closed_form_examples() {
        let model = CreationEnergyModel::default();
        assert_eq!(rho_creation_closed(&BoxKinematics::new(1.0, 0.0), 2.0, &model), 0.0);
        let (a_prime, t) = (0.7, 1.5);
        let v = rho_creation_closed(&BoxKinematics::new(1.0, a_prime), t, &model);
        assert!((v + a_prime * a_prime / (144.0 * PI * PI * t)).abs() < 1e-16);
        let p2: f64 = 1.52069;
        let expected = (144.0 - 36.0 * 2f64.powf(10.0 / 3.0) + 18.0 * 2f64.powf(8.0 / 3.0) * p2 + 36.0 * p2) / (576.0 * PI * PI * 2f64.powf(10.0 / 3.0));
        let v = rho_creation_closed(&BoxKinematics::new(2.0, 0.0), 1.0, &model);
        // the reference uses 𝒫(2) rounded to six digits
        assert!((v - expected).abs() < 1e-4 * expected.abs(), "{v} vs {expected}");
    }

    #[test]
    fn quadrature_a1_reduction() {
        let model = CreationEnergyModel::default();
        // a = 1, a′ = 3: Q = 1
        let v = rho_creation_quadrature(&BoxKinematics::new(1.0, 3.0), 1.0, &model).unwrap();
        assert!((v + 1.0 / (4.0 * PI * PI)).abs() < 1e-10, "{v}");
        let v2 = rho_creation_quadrature(&BoxKinematics::new(1.0, 3.0), 2.0, &model).unwrap();
        assert!((v / v2 - 4.0).abs() < 1e-8);
        assert!(rho_creation_quadrature(&BoxKinematics::new(1.0, 0.0), 3.0, &model).unwrap().abs() < 1e-18);
    }

    #[test]
    fn creation_energy_examples() {
        let p = BoxParams::default();
        let m = CreationEnergyModel::default();
        assert_eq!(creation_energy(50.0, 0.0, 1.0, &p, &m), 0.0);
        let (v, t) = (0.5, 2.0);
        let e = creation_energy(50.0, v, t, &p, &m);
        let expected = -50.0 * 2500.0 * (v / 50.0) * (v / 50.0) / (144.0 * PI * PI * t);
        assert!((e - expected).abs() < 1e-14 * expected.abs() + 1e-18);
        let big = BoxParams { l: 100.0, ..p };
        let e2 = creation_energy(100.0 * 1.1, 100.0 * 0.01, t, &big, &m);
        let e1 = creation_energy(50.0 * 1.1, 50.0 * 0.01, t, &p, &m);
        assert!((e2 / e1 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_partials_match_differences() {
        let p = BoxParams::default();
        for conv in [ClosedFormConvention::Published, ClosedFormConvention::Reconciled] {
            let m = CreationEnergyModel::with_convention(conv);
            for (l, v, t) in [(50.0, 0.5, 1.0), (47.0, -0.4, 2.5), (55.0, 0.3, 6.0)] {
                let an = creation_partials(l, v, t, &p, &m);
                let e = |x: &[f64]| creation_energy(x[0], x[1], x[2], &p, &m);
                let e_v = |x: &[f64]| fd_partial(e, x, 1, Order::First);
                let x = [l, v, t];
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (a.abs().max(b.abs()) + 1e-9);
                assert!(
                    close(an.e_l, fd_partial(e, &x, 0, Order::First)),
                    "{conv:?} e_l {} {}",
                    an.e_l,
                    fd_partial(e, &x, 0, Order::First)
                );
                assert!(close(an.e_v, e_v(&x)));
                assert!(close(an.e_vv, fd_partial(e, &x, 1, Order::Second)));
                assert!(
                    close(an.e_lv, fd_partial(e_v, &x, 0, Order::First)),
                    "e_lv {} {}",
                    an.e_lv,
                    fd_partial(e_v, &x, 0, Order::First)
                );
                assert!(close(an.e_tv, fd_partial(e_v, &x, 2, Order::First)));
            }
        }
    }

    #[test]
    fn free_mirror_and_quadratic_lagrangian() {
        let a = el_accel(|_, _, _| 0.0, 10.0, 3.0, 0.7, 1.0, 1.0).unwrap();
        assert_eq!(a, 0.0);
        let c = 2.0;
        let a = el_accel(|_, v, _| -c * v * v, 10.0, 3.0, 0.7, 1.0, 1.0).unwrap();
        assert!(a.abs() < 1e-9);
        assert!(matches!(
            el_accel(|_, v, _| -5.0 * v * v, 10.0, 3.0, 0.7, 1.0, 1.0),
            Err(Error::EffectiveMassSingular(_))
        ));
    }

    #[test]
    fn mode_sum_of_static_vacuum() {
        let l = 7.0;
        let bank = vacuum_mode_bank(2, l, 1.0).unwrap();
        let kin = BoxKinematics::new(1.0, 0.0);
        let expected: f64 = bank.iter().map(|m| omega_conformal(&m.k, 1.0, 0.0).unwrap().0).sum::<f64>() / (2.0 * l.powi(3));
        assert!((t00_mode_sum(&bank, &kin, l).unwrap() - expected).abs() < 1e-14 * expected);
        let bigger = t00_mode_sum(&vacuum_mode_bank(4, l, 1.0).unwrap(), &kin, l).unwrap();
        assert!(bigger > 2.0 * expected);
        let pumped = t00_mode_sum(&bank, &BoxKinematics::new(1.0, 0.5), l).unwrap();
        assert!(pumped < expected);
    }
}
