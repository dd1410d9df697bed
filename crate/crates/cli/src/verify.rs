//! The acceptance suite as a self-contained report.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use backreact_core::box3d::{
    self, BoxKinematics, BoxParams, BoxRunOptions, ClosedFormConvention, CreationEnergyModel, CreationParts, KVector, TrajectoryBackground,
};
use backreact_core::modes::{self, BogoliubovPair, ModeBackground, ModeInit};
use backreact_core::numkit::OdeOptions;
use backreact_core::ring1d::{self, RingKinematics, RingParams, RingRunOptions};
use backreact_core::{MirrorState, SimulationRecord};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{emit_config, parse_config, validate, ModelConfig, RunConfig};
use crate::run::{render_csv, render_sidecar, simulate, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "documented-open")]
    DocumentedOpen,
    #[serde(rename = "skipped")]
    Skipped,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::DocumentedOpen => "DOCUMENTED-OPEN",
            CheckStatus::Skipped => "SKIPPED",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    /// The formula or claim under test.
    pub anchor: &'static str,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
    pub detail: String,
    pub runtime_s: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: computed {:e}, reference {:e}, tolerance {:e}; {} ({:.2} s)",
            self.status.label(),
            self.id,
            self.name,
            self.computed,
            self.reference,
            self.tolerance,
            self.detail,
            self.runtime_s
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, PartialEq, Eq)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub documented_open: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub version: &'static str,
    pub level: Level,
    pub checks: Vec<CheckResult>,
    pub summary: Summary,
}

impl VerifyReport {
    pub fn failed(&self) -> bool {
        self.summary.fail > 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        let m = &self.summary;
        let _ = writeln!(
            s,
            "{} pass, {} fail, {} documented-open, {} skipped",
            m.pass, m.fail, m.documented_open, m.skipped
        );
        s
    }
}

/// Reference values the checks compare against. Replacing one of them must
/// make the corresponding check fail.
#[derive(Clone, Copy)]
pub struct References {
    pub rho2: fn(&RingKinematics) -> f64,
    pub casimir: fn(&RingKinematics, f64) -> f64,
    /// `L̈` of the 1+1D ring with backreaction.
    pub ring_accel: fn(&MirrorState, &RingParams) -> f64,
    pub el_halving_ratio: f64,
    pub wkb_doubling_ratio: f64,
    pub wronskian: f64,
    /// `c₁c₂* + c₂c₁*` of the low-frequency solution.
    pub lowfreq_normalization: f64,
    /// `closed/quadrature` of the isotropic part as printed.
    pub published_isotropic_factor: f64,
    /// `closed/quadrature` of the anisotropic part as printed, as a function of `t`.
    pub published_anisotropic_factor: fn(f64) -> f64,
}

impl Default for References {
    fn default() -> Self {
        Self {
            rho2: ring1d::rho2_closed,
            casimir: ring1d::casimir_density_closed,
            ring_accel: |s, p| ring1d::ring_accel(s, p, true).unwrap_or(f64::NAN),
            el_halving_ratio: 4.0,
            wkb_doubling_ratio: 4.0,
            wronskian: 1.0,
            lowfreq_normalization: 0.5,
            published_isotropic_factor: 0.25,
            published_anisotropic_factor: |t| t / 4.0,
        }
    }
}

/// Shared inputs of the checks; the reference box runs are computed
/// once on first use.
pub struct VerifyContext {
    pub level: Level,
    pub tol: f64,
    pub refs: References,
    box_runs: OnceLock<Result<[SimulationRecord; 2], String>>,
}

/// Initial velocities of the reference box runs.
pub const REFERENCE_V0: [f64; 2] = [-0.5, 0.5];

impl VerifyContext {
    pub fn new(level: Level) -> Self {
        Self::with_references(level, References::default())
    }

    pub fn with_references(level: Level, refs: References) -> Self {
        Self {
            level,
            tol: 1e-10,
            refs,
            box_runs: OnceLock::new(),
        }
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn box_runs(&self) -> Result<&[SimulationRecord; 2], String> {
        self.box_runs
            .get_or_init(|| {
                let p = BoxParams::default();
                let opts = BoxRunOptions {
                    tol: self.tol,
                    ..BoxRunOptions::default()
                };
                let model = CreationEnergyModel::default();
                let run = |v0: f64| box3d::simulate_box(&p, (p.l, v0), (p.t0, box3d::DEFAULT_T_END), &model, &opts).map_err(|e| e.to_string());
                let (a, b) = rayon::join(|| run(REFERENCE_V0[0]), || run(REFERENCE_V0[1]));
                Ok([a?, b?])
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn ring_opts(&self, dense_dt: f64) -> RingRunOptions {
        RingRunOptions { tol: self.tol, dense_dt }
    }
}

pub const CHECK_COUNT: u8 = 13;

/// Run check `id` (1-based).
pub fn run_check(ctx: &VerifyContext, id: u8) -> CheckResult {
    let start = Instant::now();
    let mut r = match id {
        1 => rho2_oracle(ctx),
        2 => casimir_oracle(ctx),
        3 => euler_lagrange_residual(ctx),
        4 => ring_energy_conservation(ctx),
        5 => accelerated_collapse(ctx),
        6 => bogoliubov_invariants(ctx),
        7 => wkb_order(ctx),
        8 => creation_null_point(ctx),
        9 => creation_oracle_grid(ctx),
        10 => assembler_oracle(ctx),
        11 => quantum_lenz_law(ctx),
        12 => matter_bound(ctx),
        13 => plumbing(ctx),
        _ => panic!("no check {id}"),
    };
    r.id = id;
    r.runtime_s = start.elapsed().as_secs_f64();
    r
}

pub fn verify(ctx: &VerifyContext) -> VerifyReport {
    let checks: Vec<CheckResult> = (1..=CHECK_COUNT).into_par_iter().map(|id| run_check(ctx, id)).collect();
    let mut summary = Summary::default();
    for c in &checks {
        match c.status {
            CheckStatus::Pass => summary.pass += 1,
            CheckStatus::Fail => summary.fail += 1,
            CheckStatus::DocumentedOpen => summary.documented_open += 1,
            CheckStatus::Skipped => summary.skipped += 1,
        }
    }
    VerifyReport {
        version: env!("CARGO_PKG_VERSION"),
        level: ctx.level,
        checks,
        summary,
    }
}

fn result(name: &'static str, anchor: &'static str, computed: f64, reference: f64, tolerance: f64, status: CheckStatus, detail: String) -> CheckResult {
    CheckResult {
        id: 0,
        name,
        anchor,
        computed,
        reference,
        tolerance,
        status,
        detail,
        runtime_s: 0.0,
    }
}

fn error_result(name: &'static str, anchor: &'static str, tolerance: f64, err: impl std::fmt::Display) -> CheckResult {
    result(name, anchor, f64::NAN, f64::NAN, tolerance, CheckStatus::Fail, format!("error: {err}"))
}

fn rel(x: f64, reference: f64) -> f64 {
    ((x - reference) / reference).abs()
}

/// NaN-propagating maximum.
fn worst(acc: f64, x: f64) -> f64 {
    if x.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

fn within(x: f64, tol: f64) -> bool {
    x.is_finite() && x <= tol
}

fn rho2_oracle(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "rho2_oracle";
    const ANCHOR: &str = "rho2 = (1/24pi) adot^2/a^2, mass independent";
    const TOL: f64 = 1e-6;
    let mut err: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for a_dot in [-2.0, -1.0, 1.0, 2.0] {
            let kin = RingKinematics::new(a, a_dot, 0.0);
            let reference = (ctx.refs.rho2)(&kin);
            let mut values = Vec::new();
            for m in [0.1, 1.0, 10.0] {
                match ring1d::rho2_quadrature(&kin, m) {
                    Ok(q) => values.push(q),
                    Err(e) => return error_result(NAME, ANCHOR, TOL, e),
                }
            }
            for q in &values {
                err = worst(err, rel(*q, reference));
            }
            let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            spread = worst(spread, (hi - lo) / reference.abs());
        }
    }
    let ok = within(err, TOL) && within(spread, TOL);
    result(
        NAME,
        ANCHOR,
        err,
        0.0,
        TOL,
        CheckStatus::from_bool(ok),
        format!("12-point (a, adot) grid x m in {{0.1, 1, 10}}; mass spread {spread:e}"),
    )
}

fn casimir_oracle(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "casimir_oracle";
    const ANCHOR: &str = "rho_Casimir = -pi/(6 a^2 l^2)";
    const TOL: f64 = 1e-4;
    let mut err: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for l in [1.0, 2.0 * PI, 10.0] {
            let kin = RingKinematics::new(a, 0.0, 0.0);
            let est = match ring1d::casimir_density_numeric(&kin, l, &ring1d::default_lambda_seq(&kin, l), 1e-6) {
                Ok(e) => e,
                Err(e) => return error_result(NAME, ANCHOR, TOL, e),
            };
            err = worst(err, rel(est.value, (ctx.refs.casimir)(&kin, l)));
        }
    }
    result(
        NAME,
        ANCHOR,
        err,
        0.0,
        TOL,
        CheckStatus::from_bool(within(err, TOL)),
        "9 (a, l) points, cutoff sum extrapolated to zero".into(),
    )
}

fn el_residual_at(ctx: &VerifyContext, h: f64) -> Result<f64, backreact_core::Error> {
    let p = RingParams::default();
    let rec = ring1d::simulate_ring(&p, (1.0, 0.0), 1.2, true, &ctx.ring_opts(h))?;
    ring1d::el_residual(&rec, &p, true, h)
}

fn euler_lagrange_residual(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "euler_lagrange_residual";
    const ANCHOR: &str = "(M - 1/(12 pi L)) Lddot is the EL equation of the ring action";
    const TOL: f64 = 1e-4;
    let (coarse, fine) = match (el_residual_at(ctx, 1e-3), el_residual_at(ctx, 5e-4)) {
        (Ok(c), Ok(f)) => (c, f),
        (Err(e), _) | (_, Err(e)) => return error_result(NAME, ANCHOR, TOL, e),
    };
    let ratio = coarse / fine;
    let expected = ctx.refs.el_halving_ratio;
    let ok = within(coarse, TOL) && (ratio - expected).abs() <= 0.2 * expected;
    result(
        NAME,
        ANCHOR,
        coarse,
        0.0,
        TOL,
        CheckStatus::from_bool(ok),
        format!("residual h=1e-3 {coarse:e}, h=5e-4 {fine:e}, ratio {ratio:.3} (expected {expected} +- 20%)"),
    )
}

fn ring_energy_conservation(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "ring_energy_conservation";
    const ANCHOR: &str = "E = M Ldot^2/2 - Ldot^2/(24 pi L) - pi/(6L) is conserved";
    const TOL: f64 = 1e-8;
    match ring1d::simulate_ring(&RingParams::default(), (1.0, 0.0), 5.0, true, &ctx.ring_opts(1e-3)) {
        Ok(rec) => {
            let drift = rec.diagnostics.energy_drift.unwrap_or(f64::NAN);
            let t = rec.last().map(|s| s.state.t).unwrap_or(f64::NAN);
            result(
                NAME,
                ANCHOR,
                drift,
                0.0,
                TOL,
                CheckStatus::from_bool(within(drift, TOL)),
                format!("default backreaction run, halt {} at t = {t:.6}", rec.halt.label()),
            )
        }
        Err(e) => error_result(NAME, ANCHOR, TOL, e),
    }
}

fn accelerated_collapse(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "accelerated_collapse";
    const ANCHOR: &str = "backreaction accelerates the collapse regardless of the sign of the velocity";
    let p = RingParams::default();
    let opts = ctx.ring_opts(1e-3);
    // largest L_bkr − L_nobkr over sampled t > 0.05; must stay negative
    let mut gap = f64::NEG_INFINITY;
    let mut counts = Vec::new();
    for v0 in [-0.3, 0.0, 0.3] {
        let (bkr, free) = match (
            ring1d::simulate_ring(&p, (1.0, v0), 5.0, true, &opts),
            ring1d::simulate_ring(&p, (1.0, v0), 5.0, false, &opts),
        ) {
            (Ok(b), Ok(f)) => (b, f),
            (Err(e), _) | (_, Err(e)) => return error_result(NAME, ANCHOR, 0.0, e),
        };
        let end = bkr.last().map(|s| s.state.t).unwrap_or(0.0).min(free.last().map(|s| s.state.t).unwrap_or(0.0));
        let mut n = 0;
        for s in bkr.samples.iter().filter(|s| s.state.t > 0.05 && s.state.t <= end) {
            let Some(other) = free.length_at(s.state.t) else { continue };
            gap = gap.max(s.state.length - other);
            n += 1;
        }
        counts.push(n);
    }
    let ok = gap < 0.0 && counts.iter().all(|n| *n > 0);
    result(
        NAME,
        ANCHOR,
        gap,
        0.0,
        0.0,
        CheckStatus::from_bool(ok),
        format!("max(L_bkr - L_nobkr) over V0 in {{-0.3, 0, 0.3}}; samples {counts:?}"),
    )
}

struct Conformal<F>(F);

impl<F: Fn(f64) -> (f64, f64)> ModeBackground for Conformal<F> {
    fn omega(&self, s: f64) -> f64 {
        (self.0)(s).0
    }
    fn omega_prime(&self, s: f64) -> f64 {
        (self.0)(s).1
    }
    fn q(&self, _s: f64) -> f64 {
        0.0
    }
}

fn bogoliubov_invariants(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "bogoliubov_invariants";
    const ANCHOR: &str = "|alpha|^2 - |beta|^2 = 1; c1 c2* + c2 c1* = 1/2";
    const TOL: f64 = 1e-9;
    const TOL_ANALYTIC: f64 = 1e-12;
    let runs = match ctx.box_runs() {
        Ok(r) => r,
        Err(e) => return error_result(NAME, ANCHOR, TOL, e),
    };
    let target = ctx.refs.wronskian;
    let opts = OdeOptions::with_tol(1e-12).dense(0.25);
    let drift = |tr: &modes::BogoliubovTrajectory| tr.pairs.iter().map(|p| (p.wronskian() - target).abs()).fold(0.0, worst);
    let p = BoxParams::default();
    let mut bank: f64 = 0.0;
    let mut modes_run = 0;
    for rec in runs {
        for n in [[1, 0, 0], [0, 1, 0], [1, 1, 0], [2, 0, 1], [3, 2, 1]] {
            let evolved = TrajectoryBackground::new(rec, &p, KVector::from_indices(n, p.l))
                .and_then(|bg| modes::evolve_bogoliubov(&bg, BogoliubovPair::vacuum(), bg.span(), &opts));
            match evolved {
                Ok(tr) => bank = worst(bank, drift(&tr)),
                Err(e) => return error_result(NAME, ANCHOR, TOL, e),
            }
            modes_run += 1;
        }
    }
    // a strongly nonadiabatic step where |β| is O(0.1)
    let step = Conformal(|s: f64| {
        let x = ((s - 5.0) / 0.4).tanh();
        (1.0 + 0.3 * (1.0 + x), 0.3 * (1.0 - x * x) / 0.4)
    });
    match modes::evolve_bogoliubov(&step, BogoliubovPair::vacuum(), (0.0, 10.0), &opts) {
        Ok(tr) => bank = worst(bank, drift(&tr)),
        Err(e) => return error_result(NAME, ANCHOR, TOL, e),
    }

    let mut pair_err: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    for r in [0.0f64, 0.5, 1.0, 3.0] {
        for (pa, pb) in [(0.0, 0.0), (1.0, 2.5), (4.0, 0.7)] {
            let ic = BogoliubovPair::new(Complex64::from_polar((1.0 + r * r).sqrt(), pa), Complex64::from_polar(r, pb));
            for omega0 in [0.01, 1.0, 10.0] {
                let coeffs = match modes::lowfreq_coeffs(omega0, &ic) {
                    Ok(c) => c,
                    Err(e) => return error_result(NAME, ANCHOR, TOL, e),
                };
                norm_err = worst(norm_err, (coeffs.normalization() - ctx.refs.lowfreq_normalization).abs());
                for omega in [0.1, 2.0] {
                    for q_int in [-2.0, 0.0, 3.0] {
                        let pair = modes::lowfreq_alpha_beta(&coeffs, omega, q_int);
                        let scale = pair.alpha.norm_sqr() + pair.beta.norm_sqr();
                        pair_err = worst(pair_err, (pair.wronskian() - target).abs() / scale);
                    }
                }
            }
        }
    }
    let ok = within(bank, TOL) && within(pair_err, TOL_ANALYTIC) && within(norm_err, TOL_ANALYTIC);
    result(
        NAME,
        ANCHOR,
        bank,
        target,
        TOL,
        CheckStatus::from_bool(ok),
        format!("{modes_run} box modes + tanh step; low-frequency Wronskian error {pair_err:e} relative to |alpha|^2 + |beta|^2, c1c2 normalization error {norm_err:e} (tolerance {TOL_ANALYTIC:e})"),
    )
}

/// `a` rising smoothly from `a0` to `a1` over `[0, T]`, `ȧ = 0` at both ends.
fn cosine_quench(a0: f64, a1: f64, period: f64) -> impl Fn(f64) -> RingKinematics + Copy {
    move |t: f64| {
        let s = (t / period).clamp(0.0, 1.0);
        let w = PI / period;
        let inside = t > 0.0 && t < period;
        let half = 0.5 * (a1 - a0);
        let a = a0 + half * (1.0 - (PI * s).cos());
        let a_dot = if inside { half * w * (PI * s).sin() } else { 0.0 };
        let a_ddot = if inside { half * w * w * (PI * s).cos() } else { 0.0 };
        RingKinematics::new(a, a_dot, a_ddot)
    }
}

fn wkb_deviation(period: f64) -> Result<f64, backreact_core::Error> {
    let (k, m): (f64, f64) = (1.0, 0.5);
    let w0 = (k * k + m * m).sqrt();
    let a1 = k / ((1.2 * w0).powi(2) - m * m).sqrt();
    let bg = cosine_quench(1.0, a1, period);
    let tr = modes::evolve_mode_exact(
        k,
        bg,
        m,
        (0.0, period),
        ModeInit::InstantaneousVacuum,
        &OdeOptions::with_tol(1e-12).dense(period / 20.0),
    )?;
    let mut worst_dev: f64 = 0.0;
    for s in tr.iter().skip(1) {
        worst_dev = worst(worst_dev, (s.f - modes::wkb_mode_solution(k, bg, m, 0.0, s.t)?).norm());
    }
    Ok(worst_dev)
}

fn wkb_amplitude_error() -> Result<(f64, f64), backreact_core::Error> {
    let (k, m) = (3.0, 1.0);
    let bg = cosine_quench(1.0, 1.3, 60.0);
    let mut adiabaticity: f64 = 0.0;
    for i in 0..=600 {
        adiabaticity = worst(adiabaticity, modes::adiabaticity(k, &bg(i as f64 * 0.1), m)?);
    }
    let tr = modes::evolve_mode_exact(k, bg, m, (0.0, 60.0), ModeInit::InstantaneousVacuum, &OdeOptions::with_tol(1e-11).dense(0.5))?;
    let mut err: f64 = 0.0;
    for s in &tr {
        let amplitude = (2.0 * ring1d::mode_frequency(k, &bg(s.t), m)?.wkb()).powf(-0.5);
        err = worst(err, ((s.f.norm() - amplitude) / amplitude).abs());
    }
    Ok((adiabaticity, err))
}

fn wkb_order(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "wkb_order";
    const ANCHOR: &str = "f = (2W)^(-1/2) exp(-i int W), W = omega + O(T^-2)";
    const TOL: f64 = 1e-3;
    let ((adiabaticity, amp), d100, d200) = match (wkb_amplitude_error(), wkb_deviation(100.0), wkb_deviation(200.0)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return error_result(NAME, ANCHOR, TOL, e),
    };
    let ratio = d100 / d200;
    let expected = ctx.refs.wkb_doubling_ratio;
    let ok = adiabaticity <= 0.01 && within(amp, TOL) && (ratio - expected).abs() <= 0.15 * expected;
    result(
        NAME,
        ANCHOR,
        amp,
        0.0,
        TOL,
        CheckStatus::from_bool(ok),
        format!("max adiabaticity {adiabaticity:.2e}; |f - f_WKB| T=100 {d100:e}, T=200 {d200:e}, ratio {ratio:.3} (expected {expected} +- 15%)"),
    )
}

fn creation_null_point(_ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "creation_null_point";
    const ANCHOR: &str = "9a^4 - 36a^(10/3) + 18a^(8/3)P + 9a^2 P = 0 at a = 1";
    const TOL: f64 = 1e-10;
    let model = CreationEnergyModel::default();
    let kin = BoxKinematics::new(1.0, 0.0);
    let mut worst_abs: f64 = 0.0;
    for t in [1.0, 2.0, 5.0] {
        match box3d::rho_creation_quadrature(&kin, t, &model) {
            Ok(q) => worst_abs = worst(worst_abs, q.abs()),
            Err(e) => return error_result(NAME, ANCHOR, TOL, e),
        }
        worst_abs = worst(worst_abs, box3d::rho_creation_closed(&kin, t, &model).abs());
    }
    result(
        NAME,
        ANCHOR,
        worst_abs,
        0.0,
        TOL,
        CheckStatus::from_bool(within(worst_abs, TOL)),
        "quadrature and closed form at t in {1, 2, 5}".into(),
    )
}

/// Relative difference, or absolute when the reference is below `floor`.
fn rel_or_abs(x: f64, reference: f64, floor: f64) -> f64 {
    if reference.abs() < floor {
        (x - reference).abs()
    } else {
        rel(x, reference)
    }
}

struct GridPoint {
    a: f64,
    a_prime: f64,
    t: f64,
    quad: [CreationParts; 2],
    closed: [CreationParts; 2],
}

fn creation_oracle_grid(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "creation_oracle_grid";
    const ANCHOR: &str = "rho_creation quadrature of (Omega^2-Q)/Omega0 + Omega0 - 2 Omega over R(t) vs closed form";
    const TOL: f64 = 1e-3;
    // values below this are compared absolutely (null point neighbourhood)
    const FLOOR: f64 = 1e-14;
    if ctx.level == Level::Fast {
        return result(NAME, ANCHOR, f64::NAN, f64::NAN, TOL, CheckStatus::Skipped, "full verify only".into());
    }
    let models = [ClosedFormConvention::Published, ClosedFormConvention::Reconciled].map(CreationEnergyModel::with_convention);
    let mut inputs = Vec::new();
    for a in [0.5, 0.8, 1.0, 1.25, 2.0] {
        for a_prime in [0.0, 0.25, 0.5, 1.0, 2.0] {
            for t in [0.5, 1.0, 2.0] {
                inputs.push((a, a_prime, t));
            }
        }
    }
    let grid: Result<Vec<GridPoint>, backreact_core::Error> = inputs
        .par_iter()
        .map(|&(a, a_prime, t)| {
            let kin = BoxKinematics::new(a, a_prime / a.cbrt());
            let q = |m: &CreationEnergyModel| box3d::rho_creation_quadrature_parts(&kin, t, m, 0.0);
            Ok(GridPoint {
                a,
                a_prime,
                t,
                quad: [q(&models[0])?, q(&models[1])?],
                closed: [
                    box3d::rho_creation_closed_parts(&kin, t, &models[0]),
                    box3d::rho_creation_closed_parts(&kin, t, &models[1]),
                ],
            })
        })
        .collect();
    let grid = match grid {
        Ok(g) => g,
        Err(e) => return error_result(NAME, ANCHOR, TOL, e),
    };

    let mut direct: f64 = 0.0;
    let mut reconciled: f64 = 0.0;
    let mut factor: f64 = 0.0;
    let mut reduction: f64 = 0.0;
    let iso_factor = ctx.refs.published_isotropic_factor;
    for g in &grid {
        direct = worst(direct, rel_or_abs(g.quad[0].total(), g.closed[0].total(), FLOOR));
        reconciled = worst(reconciled, rel_or_abs(g.quad[1].total(), g.closed[1].total(), FLOOR));
        let aniso_factor = (ctx.refs.published_anisotropic_factor)(g.t);
        factor = worst(factor, rel_or_abs(g.quad[0].isotropic * iso_factor, g.closed[0].isotropic, FLOOR));
        factor = worst(factor, rel_or_abs(g.quad[0].anisotropic * aniso_factor, g.closed[0].anisotropic, FLOOR));
        if g.a == 1.0 && g.a_prime > 0.0 {
            let ap2 = g.a_prime * g.a_prime;
            reduction = worst(reduction, rel(g.quad[0].total(), -ap2 / (36.0 * PI * PI * g.t * g.t)));
            reduction = worst(reduction, rel(g.closed[0].total(), -ap2 / (144.0 * PI * PI * g.t)));
        }
    }
    let status = if within(direct, TOL) {
        CheckStatus::Pass
    } else if within(factor, TOL) && within(reduction, TOL) && within(reconciled, TOL) {
        CheckStatus::DocumentedOpen
    } else {
        CheckStatus::Fail
    };
    result(
        NAME,
        ANCHOR,
        direct,
        0.0,
        TOL,
        status,
        format!(
            "{} points; printed closed form vs quadrature max rel {direct:.3e}; closed = quadrature x (1/4 isotropic, t/4 anisotropic) to {factor:.1e}; a=1 reduction -a'^2/(36pi^2 t^2) vs -a'^2/(144pi^2 t) to {reduction:.1e}; reconciled convention (1/(32pi^3), t^2) agrees to {reconciled:.1e}",
            grid.len()
        ),
    )
}

fn assembler_oracle(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "el_assembler_oracle";
    const ANCHOR: &str = "Euler-Lagrange assembly of a velocity-dependent Lagrangian reproduces the 1+1D equation of motion";
    const TOL: f64 = 1e-6;
    let ring = RingParams::default();
    let energy = |l: f64, v: f64, _t: f64| -v * v / (24.0 * PI * l) + PI / (6.0 * l);
    let mut err: f64 = 0.0;
    for l in [0.1, 0.2, 0.5, 1.0, 3.0] {
        for v in [-2.0, -0.3, 0.4, 1.5] {
            let expected = (ctx.refs.ring_accel)(&MirrorState::new(0.0, l, v), &ring);
            match box3d::el_accel(energy, ring.mass, l, v, 1.0, 1.0) {
                Ok(got) => err = worst(err, rel(got, expected)),
                Err(e) => return error_result(NAME, ANCHOR, TOL, e),
            }
        }
    }
    result(
        NAME,
        ANCHOR,
        err,
        0.0,
        TOL,
        CheckStatus::from_bool(within(err, TOL)),
        "20-point (L, Ldot) grid".into(),
    )
}

fn quantum_lenz_law(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "quantum_lenz_law";
    const ANCHOR: &str = "the mirror slows down in both cases (l = 50, m = 10, Ldot(t0) = +-0.5)";
    const SLACK: f64 = 1e-9;
    let runs = match ctx.box_runs() {
        Ok(r) => r,
        Err(e) => return error_result(NAME, ANCHOR, SLACK, e),
    };
    let mut increase = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    let mut complete = true;
    for (v0, rec) in REFERENCE_V0.iter().zip(runs) {
        let inc = box3d::max_speed_increase(rec);
        increase = increase.max(inc);
        complete &= rec.halt.is_clean();
        let last = rec.last().map(|s| s.state.velocity).unwrap_or(f64::NAN);
        parts.push(format!(
            "V0={v0}: max |V| step increase {inc:.2e}, final V {last:.6}, halt {}",
            rec.halt.label()
        ));
    }
    let ok = complete && increase <= SLACK;
    result(NAME, ANCHOR, increase, 0.0, SLACK, CheckStatus::from_bool(ok), parts.join("; "))
}

fn matter_bound(ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "matter_bound";
    const ANCHOR: &str = "|Edot_matter(t0)| (t_end - t0) is negligible against E_creation";
    const TOL: f64 = 1e-2;
    let runs = match ctx.box_runs() {
        Ok(r) => r,
        Err(e) => return error_result(NAME, ANCHOR, TOL, e),
    };
    let mut ratio: f64 = 0.0;
    let mut parts = Vec::new();
    for (v0, rec) in REFERENCE_V0.iter().zip(runs) {
        let (r, rate, bound) = match (box3d::matter_bound_ratio(rec), box3d::initial_matter_rate(rec), box3d::matter_energy_bound(rec)) {
            (Ok(r), Ok(rate), Ok(b)) => (r, rate, b),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return error_result(NAME, ANCHOR, TOL, e),
        };
        ratio = worst(ratio, r);
        parts.push(format!("V0={v0}: Edot_matter(t0) {rate:.3e}, bound {bound:.3e}, ratio {r:.3e}"));
    }
    result(NAME, ANCHOR, ratio, 0.0, TOL, CheckStatus::from_bool(within(ratio, TOL)), parts.join("; "))
}

/// Deterministic sample of the valid config space, indexed by `i`.
pub fn sample_config(i: usize) -> RunConfig {
    let pick = |choices: &[f64], salt: usize| choices[(i / (salt + 1) + salt * 7) % choices.len()];
    let wiggle = 1.0 + (i as f64 * 0.618_033_988_749_894_9).fract() * 1e-3;
    let v0: Vec<f64> = (0..1 + i % 3).map(|j| pick(&[-0.5, -0.3, 0.0, 0.1, 0.3, 0.5], j) * wiggle).collect();
    let tol = pick(&[1e-12, 1e-10, 1e-8, 1e-6], 3);
    let dt = pick(&[1e-3, 2.5e-3, 1e-2], 4);
    let dir = ["out", "results/run", "a b"][i % 3].to_string();
    let name = format!("cfg_{i}");
    if i.is_multiple_of(2) {
        let mass = pick(&[0.5, 1.0, 2.0, 10.0], 1) * wiggle;
        let backreaction = i.is_multiple_of(4);
        let l0 = pick(&[0.5, 1.0, 3.0], 2) * wiggle;
        let mut c = parse_config("model = \"ring\"").expect("ring defaults");
        c.model = ModelConfig::Ring(crate::config::RingSection {
            params: RingParams {
                mass,
                l: pick(&[1.0, 2.0 * PI], 5),
                ..RingParams::default()
            },
            backreaction,
        });
        c.l0 = l0;
        c.v0 = v0;
        c.t_end = pick(&[0.5, 1.0, 5.0], 6) * wiggle;
        c.tol = tol;
        c.dt = dt;
        c.output_dir = dir;
        c.name = name;
        c
    } else {
        let mut c = parse_config("model = \"box\"").expect("box defaults");
        if let ModelConfig::Box(b) = &mut c.model {
            b.params.l = pick(&[10.0, 50.0, 100.0], 1) * wiggle;
            b.params.mirror_mass = pick(&[1.0, 10.0], 2);
            b.params.t0 = pick(&[0.5, 1.0, 2.0], 5);
            b.convention = if i % 4 == 1 {
                ClosedFormConvention::Published
            } else {
                ClosedFormConvention::Reconciled
            };
            b.time_variable = if i % 8 < 4 {
                box3d::TimeVariable::Cosmic
            } else {
                box3d::TimeVariable::Conformal
            };
            c.l0 = b.params.l * pick(&[0.9, 1.0, 1.1], 6);
            c.t_end = b.params.t0 + pick(&[1.0, 9.0], 7) * wiggle;
        }
        c.v0 = v0;
        c.tol = tol;
        c.dt = dt;
        c.output_dir = dir;
        c.name = name;
        c
    }
}

/// Exit status a `run` with this config would report, without writing files.
pub fn dry_run_status(text: &str) -> Status {
    let Ok(config) = parse_config(text) else { return Status::Error };
    config.v0.iter().fold(Status::Clean, |acc, v0| {
        acc.worst(simulate(&config, *v0).map(|s| s.status()).unwrap_or(Status::Error))
    })
}

fn rendered(text: &str) -> Option<Vec<Vec<u8>>> {
    let config = parse_config(text).ok()?;
    config
        .v0
        .iter()
        .map(|v0| {
            let sim = simulate(&config, *v0).ok()?;
            let mut bytes = render_csv(&config, &sim);
            bytes.extend(render_sidecar(&config, &sim, "x.csv"));
            Some(bytes)
        })
        .collect()
}

fn plumbing(_ctx: &VerifyContext) -> CheckResult {
    const NAME: &str = "plumbing";
    const ANCHOR: &str = "config round trip, byte-identical re-runs, exit-code contract";
    const CASES: usize = 1000;
    let mut round_trip_failures = 0;
    for i in 0..CASES {
        let c = sample_config(i);
        let ok = validate(&crate::config::parse_keys(&emit_config(&c)).unwrap_or_default())
            .map(|back| back == c)
            .unwrap_or(false);
        if !ok {
            round_trip_failures += 1;
        }
    }
    let ring_short = "model = \"ring\"\nt_end = 0.5\nsolver.dt = 0.005\n";
    let box_short = "model = \"box\"\nt_end = 1.5\n";
    let reruns_identical = [ring_short, box_short]
        .iter()
        .all(|text| matches!((rendered(text), rendered(text)), (Some(a), Some(b)) if a == b));
    let exits = [
        (ring_short, Status::Clean),
        ("model = \"ring\"\nt_end = 5.0\n", Status::Truncated),
        ("model = \"ring\"\nring.M = -1\n", Status::Error),
        ("model = \"ring\"\nunknown = 1\n", Status::Error),
    ];
    let exit_mismatches = exits.iter().filter(|(text, want)| dry_run_status(text) != *want).count();
    let ok = round_trip_failures == 0 && reruns_identical && exit_mismatches == 0;
    result(
        NAME,
        ANCHOR,
        (round_trip_failures + exit_mismatches + usize::from(!reruns_identical)) as f64,
        0.0,
        0.0,
        CheckStatus::from_bool(ok),
        format!(
            "round trip {}/{CASES}; re-runs identical: {reruns_identical}; exit-code mismatches {exit_mismatches}",
            CASES - round_trip_failures
        ),
    )
}
