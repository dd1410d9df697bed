//! Embedded Dormand–Prince 5(4) integrator with PI step control.
//!
//! Output is produced on a uniform grid `t0 + j·dense_dt`: the step is clipped
//! so that every grid point is the endpoint of an accepted step, which keeps
//! the sampled trajectory free of interpolation error. An optional event
//! function halts the integration where it crosses from positive to
//! non-positive; the crossing is located by bisection on partial steps.

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)`, written into the third argument.
pub trait Rhs: Fn(f64, &[f64], &mut [f64]) -> Result<()> {}
impl<F: Fn(f64, &[f64], &mut [f64]) -> Result<()>> Rhs for F {}

#[derive(Debug, Clone)]
pub struct OdeProblem<F> {
    pub rhs: F,
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<f64>,
}

impl<F: Rhs> OdeProblem<F> {
    pub fn new(rhs: F, t0: f64, t1: f64, y0: Vec<f64>) -> Self {
        Self { rhs, t0, t1, y0 }
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Output spacing. `None` records every accepted step.
    pub dense_dt: Option<f64>,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            dense_dt: None,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// Share of a user tolerance granted to each step, leaving room for the
/// accumulation of local errors over long spans.
pub const STEP_TOL_FRACTION: f64 = 0.1;

impl OdeOptions {
    /// `rtol = atol = STEP_TOL_FRACTION·tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: STEP_TOL_FRACTION * tol,
            atol: STEP_TOL_FRACTION * tol,
            ..Self::default()
        }
    }

    pub fn dense(mut self, dt: f64) -> Self {
        self.dense_dt = Some(dt);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest accepted scaled error estimate (≤ 1 means within tolerance).
    pub max_scaled_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.t.last().map(|&t| (t, self.y.last().unwrap().as_slice()))
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.t.push(t);
        self.y.push(y.to_vec());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Reached,
    Event { t: f64 },
    Failed(Error),
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub termination: Termination,
}

/// Integrate `problem` to `t1` under [`OdeOptions::with_tol`], sampling every
/// `dense_dt`. The final time is always included.
pub fn integrate_ode<F: Rhs>(problem: &OdeProblem<F>, tol: f64, dense_dt: f64) -> Result<Trajectory> {
    if !(tol > 0.0) || !(dense_dt > 0.0) {
        return Err(Error::invalid("tol and dense_dt must be positive"));
    }
    let sol = solve(problem, &OdeOptions::with_tol(tol).dense(dense_dt), None::<fn(f64, &[f64]) -> f64>);
    match sol.termination {
        Termination::Failed(e) => Err(e),
        _ => Ok(sol.trajectory),
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Stepper<'a, F> {
    rhs: &'a F,
    rtol: f64,
    atol: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    ynew: Vec<f64>,
    rhs_evals: usize,
}

impl<'a, F: Rhs> Stepper<'a, F> {
    fn new(rhs: &'a F, n: usize, rtol: f64, atol: f64) -> Self {
        Self {
            rhs,
            rtol,
            atol,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            ynew: vec![0.0; n],
            rhs_evals: 0,
        }
    }

    fn eval(&mut self, t: f64, idx: usize) -> Result<()> {
        self.rhs_evals += 1;
        let (tmp, k) = (&self.tmp, &mut self.k[idx]);
        (self.rhs)(t, tmp, k)?;
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ode right-hand side"));
        }
        Ok(())
    }

    /// One trial step of size `h` from `(t, y)`; `k[0]` must hold `f(t, y)`.
    /// On success `ynew` holds the 5th-order solution, `k[6]` holds
    /// `f(t + h, ynew)`, and the scaled error norm is returned.
    #[allow(clippy::needless_range_loop)]
    fn trial(&mut self, t: f64, y: &[f64], h: f64) -> Result<f64> {
        let n = y.len();
        macro_rules! stage {
            ($idx:expr, $c:expr, $($a:expr => $j:expr),+) => {{
                for i in 0..n {
                    self.tmp[i] = y[i] + h * (0.0 $(+ $a * self.k[$j][i])+);
                }
                self.eval(t + $c * h, $idx)?;
            }};
        }
        stage!(1, C2, A21 => 0);
        stage!(2, C3, A31 => 0, A32 => 1);
        stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            self.ynew[i] = y[i] + h * (A71 * self.k[0][i] + A73 * self.k[2][i] + A74 * self.k[3][i] + A75 * self.k[4][i] + A76 * self.k[5][i]);
        }
        self.tmp.copy_from_slice(&self.ynew);
        self.eval(t + h, 6)?;
        let mut acc = 0.0;
        for i in 0..n {
            let err = h * (E1 * self.k[0][i] + E3 * self.k[2][i] + E4 * self.k[3][i] + E5 * self.k[4][i] + E6 * self.k[5][i] + E7 * self.k[6][i]);
            let sc = self.atol + self.rtol * y[i].abs().max(self.ynew[i].abs());
            acc += (err / sc).powi(2);
        }
        let norm = (acc / n as f64).sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("ode error estimate"));
        }
        Ok(norm)
    }

    fn initial_step(&mut self, t: f64, y: &[f64], dir: f64, h_max: f64) -> Result<f64> {
        let n = y.len() as f64;
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sk = self.atol + self.rtol * yi.abs();
            dnf += (fi / sk).powi(2);
            dny += (yi / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(h_max);
        for (i, yi) in y.iter().enumerate() {
            self.tmp[i] = yi + dir * h * self.k[0][i];
        }
        self.eval(t + dir * h, 1)?;
        let mut der2 = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let sk = self.atol + self.rtol * yi.abs();
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 { (1e-6f64).max(h * 1e-3) } else { (0.01 / der12).powf(0.2) };
        Ok((100.0 * h).min(h1).min(h_max))
    }
}

/// General driver: integrates until `t1`, until `event` crosses from positive
/// to non-positive, or until failure. Everything produced before a failure is
/// returned in the trajectory.
pub fn solve<F, G>(problem: &OdeProblem<F>, opts: &OdeOptions, event: Option<G>) -> Solution
where
    F: Rhs,
    G: Fn(f64, &[f64]) -> f64,
{
    let mut traj = Trajectory::default();
    let n = problem.y0.len();
    let (t0, t1) = (problem.t0, problem.t1);
    let fail = |traj, e| Solution {
        trajectory: traj,
        termination: Termination::Failed(e),
    };
    if n == 0 {
        return fail(traj, Error::invalid("ode dimension must be at least 1"));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return fail(traj, Error::invalid("ode tolerances must be positive"));
    }
    if let Some(dt) = opts.dense_dt {
        if !(dt > 0.0) {
            return fail(traj, Error::invalid("dense_dt must be positive"));
        }
    }
    traj.push(t0, &problem.y0);
    if t1 == t0 {
        return Solution {
            trajectory: traj,
            termination: Termination::Reached,
        };
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut st = Stepper::new(&problem.rhs, n, opts.rtol, opts.atol);
    let mut t = t0;
    let mut y = problem.y0.clone();
    st.tmp.copy_from_slice(&y);
    if let Err(e) = st.eval(t, 0) {
        return fail(traj, e);
    }
    if let Some(g) = &event {
        if g(t, &y) <= 0.0 {
            return Solution {
                trajectory: traj,
                termination: Termination::Event { t },
            };
        }
    }
    let h_max = opts.h_max.min(span);
    let mut h = match opts.h_init {
        Some(h) => h.abs().min(h_max),
        None => match st.initial_step(t, &y, dir, h_max) {
            Ok(h) => h,
            Err(_) => 1e-3 * span,
        },
    };
    let mut facold: f64 = 1e-4;
    let mut next_out_index: u64 = 1;
    let out_time = |j: u64| match opts.dense_dt {
        Some(dt) => {
            let tj = t0 + dir * dt * j as f64;
            if dir * (tj - t1) >= 0.0 {
                t1
            } else {
                tj
            }
        }
        None => t1,
    };
    let mut last_cause: Option<String> = None;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return fail(traj, Error::TooManySteps(opts.max_steps));
        }
        steps += 1;
        let target = out_time(next_out_index);
        let remaining = (target - t).abs();
        // Land exactly on the next output point; split the remainder when it
        // is only slightly longer than one step.
        let (h_step, lands) = if remaining <= h {
            (remaining, true)
        } else if remaining < 1.1 * h {
            (0.5 * remaining, false)
        } else {
            (h, false)
        };
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h_step < h_floor && !lands {
            return fail(
                traj,
                Error::StepUnderflow {
                    t,
                    h: h_step,
                    cause: last_cause,
                },
            );
        }
        let signed_h = dir * h_step;
        match st.trial(t, &y, signed_h) {
            Ok(err) if err <= 1.0 => {
                let fac11 = err.powf(EXPO1);
                let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                facold = err.max(1e-4);
                let h_proposed = (h_step / fac).min(h_max);
                st.stats_accept(&mut traj.stats, err);
                let t_new = if lands { target } else { t + signed_h };
                if let Some(g) = &event {
                    if g(t_new, &st.ynew) <= 0.0 {
                        let (te, ye) = locate_event(&mut st, g, t, &y, signed_h, t_new);
                        traj.push(te, &ye);
                        return Solution {
                            trajectory: traj,
                            termination: Termination::Event { t: te },
                        };
                    }
                }
                t = t_new;
                y.copy_from_slice(&st.ynew);
                let (k0, rest) = st.k.split_at_mut(1);
                k0[0].copy_from_slice(&rest[5]);
                if lands {
                    traj.push(t, &y);
                    if t == t1 {
                        return Solution {
                            trajectory: traj,
                            termination: Termination::Reached,
                        };
                    }
                    next_out_index += 1;
                    // a clipped step carries no information against the current h
                    h = if h_step < h { h.max(h_proposed) } else { h_proposed };
                } else {
                    if opts.dense_dt.is_none() {
                        traj.push(t, &y);
                    }
                    h = h_proposed;
                }
                last_cause = None;
            }
            Ok(err) => {
                traj.stats.rejected += 1;
                let fac11 = err.powf(EXPO1);
                h = h_step / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            }
            Err(e) => {
                traj.stats.rejected += 1;
                last_cause = Some(e.to_string());
                h = 0.25 * h_step;
            }
        }
    }
}

impl<F> Stepper<'_, F> {
    fn stats_accept(&self, stats: &mut StepStats, err: f64) {
        stats.accepted += 1;
        stats.max_scaled_error = stats.max_scaled_error.max(err);
    }
}

/// Bisection on the step fraction for the first point with `g ≤ 0`.
fn locate_event<F: Rhs, G: Fn(f64, &[f64]) -> f64>(st: &mut Stepper<'_, F>, g: &G, t: f64, y: &[f64], h: f64, t_end: f64) -> (f64, Vec<f64>) {
    let k0 = st.k[0].clone();
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut best = (t_end, st.ynew.clone());
    for _ in 0..200 {
        if (hi - lo) * h.abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        st.k[0].copy_from_slice(&k0);
        let tm = t + mid * h;
        match st.trial(t, y, mid * h) {
            Ok(_) if g(tm, &st.ynew) > 0.0 => lo = mid,
            Ok(_) => {
                hi = mid;
                best = (tm, st.ynew.clone());
            }
            Err(_) => hi = mid,
        }
    }
    st.k[0].copy_from_slice(&k0);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn decay() -> OdeProblem<impl Rhs> {
        OdeProblem::new(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            1.0,
            vec![1.0],
        )
    }

    fn oscillator(t1: f64) -> OdeProblem<impl Rhs> {
        OdeProblem::new(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            t1,
            vec![1.0, 0.0],
        )
    }

    #[test]
    fn exponential_decay() {
        let tol = 1e-10;
        let tr = integrate_ode(&decay(), tol, 0.1).unwrap();
        let (t, y) = tr.last().unwrap();
        assert_eq!(t, 1.0);
        assert!((y[0] - (-1.0f64).exp()).abs() <= tol, "{}", y[0]);
        assert_eq!(tr.len(), 11);
        assert!(tr.stats.max_scaled_error <= 1.0);
    }

    #[test]
    fn oscillator_period() {
        let tol = 1e-10;
        let tr = integrate_ode(&oscillator(2.0 * PI), tol, 0.5).unwrap();
        let (_, y) = tr.last().unwrap();
        assert!((y[0] - 1.0).abs() <= 10.0 * tol);
        assert!(y[1].abs() <= 10.0 * tol);
    }

    #[test]
    fn constant_frequency_energy_is_conserved() {
        let w = 3.0;
        let tol = 1e-10;
        let p = OdeProblem::new(
            move |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -w * w * y[0];
                Ok(())
            },
            0.0,
            100.0 / w,
            vec![1.0, 0.0],
        );
        let tr = integrate_ode(&p, tol, 0.05).unwrap();
        let e0 = w * w;
        let drift = tr.y.iter().map(|y| ((y[1] * y[1] + w * w * y[0] * y[0]) - e0).abs() / e0).fold(0.0, f64::max);
        assert!(drift <= 10.0 * tol, "drift {drift:e}");
    }

    #[test]
    fn halving_tol_does_not_increase_error() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 0..6 {
            let tol = 1e-6 / 2f64.powi(k);
            let e1 = {
                let (_, y) = integrate_ode(&decay(), tol, 1.0).unwrap().last().map(|(t, y)| (t, y.to_vec())).unwrap();
                (y[0] - (-1.0f64).exp()).abs()
            };
            let e2 = {
                let tr = integrate_ode(&oscillator(2.0 * PI), tol, 2.0 * PI).unwrap();
                let (_, y) = tr.last().unwrap();
                ((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt()
            };
            assert!(e1 <= prev.0 * 1.0001 + 1e-16, "exp tol {tol:e}: {e1:e} > {:e}", prev.0);
            assert!(e2 <= prev.1 * 1.0001 + 1e-16, "osc tol {tol:e}: {e2:e} > {:e}", prev.1);
            prev = (e1, e2);
        }
    }

    #[test]
    fn degenerate_span_returns_initial_state() {
        let mut p = decay();
        p.t1 = p.t0;
        let tr = integrate_ode(&p, 1e-8, 0.1).unwrap();
        assert_eq!(tr.t, vec![0.0]);
        assert_eq!(tr.y, vec![vec![1.0]]);
    }

    #[test]
    fn backwards_integration() {
        let p = OdeProblem::new(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[0];
                Ok(())
            },
            1.0,
            0.0,
            vec![(-1.0f64).exp()],
        );
        let tr = integrate_ode(&p, 1e-11, 0.25).unwrap();
        assert_eq!(tr.t.len(), 5);
        assert!((tr.last().unwrap().1[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn event_is_located() {
        // y = 1 - t²/2 hits 0.5 at t = 1
        let p = OdeProblem::new(
            |t: f64, _y: &[f64], dy: &mut [f64]| {
                dy[0] = -t;
                Ok(())
            },
            0.0,
            5.0,
            vec![1.0],
        );
        let sol = solve(&p, &OdeOptions::with_tol(1e-12).dense(0.3), Some(|_t: f64, y: &[f64]| y[0] - 0.5));
        match sol.termination {
            Termination::Event { t } => assert!((t - 1.0).abs() < 1e-12, "{t}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(sol.trajectory.len(), 5);
    }

    #[test]
    fn singularity_reports_step_underflow() {
        // y' = y², y(0) = 1 blows up at t = 1
        let p = OdeProblem::new(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            2.0,
            vec![1.0],
        );
        let err = integrate_ode(&p, 1e-10, 0.1).unwrap_err();
        match err {
            Error::StepUnderflow { t, .. } => assert!((t - 1.0).abs() < 1e-3),
            Error::NonFinite(_) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rhs_errors_shrink_the_step() {
        // refusing y < 0.5 forces the controller to creep toward the boundary
        let p = OdeProblem::new(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                if y[0] < 0.5 {
                    return Err(Error::invalid("domain"));
                }
                dy[0] = -1.0;
                Ok(())
            },
            0.0,
            1.0,
            vec![1.0],
        );
        let err = integrate_ode(&p, 1e-10, 0.1).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { cause: Some(_), .. }), "{err:?}");
    }
}
