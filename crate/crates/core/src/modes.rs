//! Single-mode dynamics: the exact parametric oscillator `f̈ + w²f = 0`,
//! its second-order WKB approximation, and the Bogoliubov `(α, β)` system
//! with its low-frequency analytic solution.
//!
//! Mode functions are normalized as `f = (2W)^{−1/2} e^{−i∫W}` so that the
//! Wronskian `(f ḟ* − f* ḟ)/i = 2 Im(f ḟ*)` equals 1.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::{self, Domain, OdeOptions, OdeProblem, QuadSpec, Termination};
use crate::ring1d::{mode_frequency, RingKinematics};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A point of the exact mode trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub f: Complex64,
    pub f_dot: Complex64,
}

impl ModeState {
    pub fn wronskian(&self) -> f64 {
        mode_wronskian(self.f, self.f_dot)
    }
}

/// `2 Im(f ḟ*)`, equal to 1 for a correctly normalized positive-frequency mode.
pub fn mode_wronskian(f: Complex64, f_dot: Complex64) -> f64 {
    2.0 * (f * f_dot.conj()).im
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeInit {
    /// `f = (2ω)^{−1/2}`, `ḟ = −iωf` with the instantaneous `ω_k(t₀)`.
    InstantaneousVacuum,
    Explicit {
        f: Complex64,
        f_dot: Complex64,
    },
}

/// Integrate `f̈ + (ω_k² + σ)f = 0` along the scale-factor history `bg`
/// over `span`, sampling every `dense_dt`.
pub fn evolve_mode_exact<B>(k: f64, bg: B, m: f64, span: (f64, f64), init: ModeInit, opts: &OdeOptions) -> Result<Vec<ModeState>>
where
    B: Fn(f64) -> RingKinematics,
{
    let (t0, t1) = span;
    let (f0, fd0) = match init {
        ModeInit::Explicit { f, f_dot } => (f, f_dot),
        ModeInit::InstantaneousVacuum => {
            let w = mode_frequency(k, &bg(t0), m)?.omega;
            let f = Complex64::new((2.0 * w).powf(-0.5), 0.0);
            (f, -I * w * f)
        }
    };
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let w2 = mode_frequency(k, &bg(t), m)?.w_squared();
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -w2 * y[0];
        dy[3] = -w2 * y[1];
        Ok(())
    };
    let problem = OdeProblem::new(rhs, t0, t1, vec![f0.re, f0.im, fd0.re, fd0.im]);
    let sol = numkit::solve(&problem, opts, None::<fn(f64, &[f64]) -> f64>);
    if let Termination::Failed(e) = sol.termination {
        return Err(e);
    }
    let tr = sol.trajectory;
    Ok(tr
        .t
        .iter()
        .zip(&tr.y)
        .map(|(&t, y)| ModeState {
            t,
            f: Complex64::new(y[0], y[1]),
            f_dot: Complex64::new(y[2], y[3]),
        })
        .collect())
}

/// Second-order adiabatic mode `(2W)^{−1/2} exp(−i∫_{t₀}^{t} W dt′)`.
pub fn wkb_mode_solution<B>(k: f64, bg: B, m: f64, t0: f64, t: f64) -> Result<Complex64>
where
    B: Fn(f64) -> RingKinematics,
{
    let w_at = |s: f64| mode_frequency(k, &bg(s), m).map(|f| f.wkb());
    let w = w_at(t)?;
    if !(w > 0.0) {
        return Err(Error::invalid("second-order frequency is not positive"));
    }
    let phase = wkb_phase(&w_at, t0, t)?;
    Ok(Complex64::from_polar((2.0 * w).powf(-0.5), -phase))
}

fn wkb_phase<W: Fn(f64) -> Result<f64>>(w_at: &W, t0: f64, t: f64) -> Result<f64> {
    if t == t0 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if t > t0 { (t0, t, 1.0) } else { (t, t0, -1.0) };
    let f = |s: f64| w_at(s).unwrap_or(f64::NAN);
    let spec = QuadSpec::new(f, Domain::Finite(lo, hi)).tolerances(1e-13, 1e-12);
    Ok(sign * numkit::quad_adaptive(&spec)?)
}

/// Default threshold above which a mode counts as nonadiabatic.
pub const NONADIABATIC_THRESHOLD: f64 = 1.0;

/// `|ω̇_k|/ω_k²` in cosmic time.
pub fn adiabaticity(k: f64, kin: &RingKinematics, m: f64) -> Result<f64> {
    let f = mode_frequency(k, kin, m)?;
    Ok((f.omega_dot / (f.omega * f.omega)).abs())
}

/// `|Ω′|/Ω²` in conformal time.
pub fn adiabaticity_conformal(omega: f64, omega_prime: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::ZeroFrequency);
    }
    Ok((omega_prime / (omega * omega)).abs())
}

pub fn is_nonadiabatic(parameter: f64, threshold: f64) -> bool {
    parameter > threshold
}

/// Bogoliubov coefficients of a conformal mode together with
/// `θ = ∫_{η₀}^{η} Ω dη′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovPair {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub phase_integral: f64,
}

impl BogoliubovPair {
    pub fn new(alpha: Complex64, beta: Complex64) -> Self {
        Self {
            alpha,
            beta,
            phase_integral: 0.0,
        }
    }

    pub fn vacuum() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// `|α|² − |β|²`
    pub fn wronskian(&self) -> f64 {
        self.alpha.norm_sqr() - self.beta.norm_sqr()
    }

    /// `|β|²`
    pub fn particle_number(&self) -> f64 {
        self.beta.norm_sqr()
    }

    /// `χ` and `χ′` reconstructed from the pair at frequency `omega`.
    pub fn mode(&self, omega: f64) -> (Complex64, Complex64) {
        let e = Complex64::from_polar(1.0, -self.phase_integral);
        let (a, b) = (self.alpha * e, self.beta * e.conj());
        ((a + b) / (2.0 * omega).sqrt(), -I * (0.5 * omega).sqrt() * (a - b))
    }
}

/// Frequency and anisotropy seen by one conformal mode, parametrized by an
/// evolution variable `s` (conformal time itself, or cosmic time with
/// `dη/ds = a^{−1/3}`).
pub trait ModeBackground {
    fn omega(&self, s: f64) -> f64;
    /// `dΩ/dη`
    fn omega_prime(&self, s: f64) -> f64;
    fn q(&self, s: f64) -> f64;
    fn deta_ds(&self, _s: f64) -> f64 {
        1.0
    }
}

/// Trajectory of a pair sampled at the evolution variable `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovTrajectory {
    pub s: Vec<f64>,
    pub pairs: Vec<BogoliubovPair>,
}

impl BogoliubovTrajectory {
    pub fn last(&self) -> Option<&BogoliubovPair> {
        self.pairs.last()
    }

    /// Largest `| |α|² − |β|² − 1 |` along the trajectory.
    pub fn wronskian_drift(&self) -> f64 {
        self.pairs.iter().map(|p| (p.wronskian() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Integrate
///
/// ```text
/// α′ = ½(Ω′/Ω − iQ/Ω) β e^{2iθ} − i(Q/2Ω) α
/// β′ = ½(Ω′/Ω + iQ/Ω) α e^{−2iθ} + i(Q/2Ω) β
/// θ′ = Ω
/// ```
///
/// over `span`, carrying `θ` as a state variable.
pub fn evolve_bogoliubov<B: ModeBackground + ?Sized>(bg: &B, ic: BogoliubovPair, span: (f64, f64), opts: &OdeOptions) -> Result<BogoliubovTrajectory> {
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let omega = bg.omega(s);
        if !(omega > 0.0) {
            return Err(Error::ZeroFrequency);
        }
        let rate = bg.omega_prime(s) / omega;
        let q = bg.q(s) / omega;
        let scale = bg.deta_ds(s);
        let alpha = Complex64::new(y[0], y[1]);
        let beta = Complex64::new(y[2], y[3]);
        let e = Complex64::from_polar(1.0, 2.0 * y[4]);
        let da = 0.5 * Complex64::new(rate, -q) * beta * e - I * (0.5 * q) * alpha;
        let db = 0.5 * Complex64::new(rate, q) * alpha * e.conj() + I * (0.5 * q) * beta;
        dy[0] = scale * da.re;
        dy[1] = scale * da.im;
        dy[2] = scale * db.re;
        dy[3] = scale * db.im;
        dy[4] = scale * omega;
        Ok(())
    };
    let y0 = vec![ic.alpha.re, ic.alpha.im, ic.beta.re, ic.beta.im, ic.phase_integral];
    let problem = OdeProblem::new(rhs, span.0, span.1, y0);
    let sol = numkit::solve(&problem, opts, None::<fn(f64, &[f64]) -> f64>);
    if let Termination::Failed(e) = sol.termination {
        return Err(e);
    }
    let tr = sol.trajectory;
    Ok(BogoliubovTrajectory {
        pairs: tr
            .y
            .iter()
            .map(|y| BogoliubovPair {
                alpha: Complex64::new(y[0], y[1]),
                beta: Complex64::new(y[2], y[3]),
                phase_integral: y[4],
            })
            .collect(),
        s: tr.t,
    })
}

/// Coefficients of the low-frequency solution
/// `α = c₁(Ω^{1/2} − iΩ^{−1/2}∫Q) + c₂Ω^{−1/2}`,
/// `β = c₁(Ω^{1/2} + iΩ^{−1/2}∫Q) − c₂Ω^{−1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowFreqCoeffs {
    pub c1: Complex64,
    pub c2: Complex64,
    pub omega0: f64,
}

impl LowFreqCoeffs {
    /// `c₁c₂* + c₂c₁*`, which is ½ for a Wronskian-normalized mode.
    pub fn normalization(&self) -> f64 {
        (self.c1 * self.c2.conj() + self.c2 * self.c1.conj()).re
    }
}

/// Match the low-frequency solution to `ic` at `η₀` (where `∫Q = 0`).
pub fn lowfreq_coeffs(omega0: f64, ic: &BogoliubovPair) -> Result<LowFreqCoeffs> {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::SingularSystem("low-frequency coefficients need Ω₀ > 0"));
    }
    let root = omega0.sqrt();
    Ok(LowFreqCoeffs {
        c1: (ic.alpha + ic.beta) / (2.0 * root),
        c2: (ic.alpha - ic.beta) * (0.5 * root),
        omega0,
    })
}

/// Evaluate the low-frequency pair at frequency `omega` with
/// `q_int = ∫_{η₀}^{η} Q dη′`. The phase `∫Ω dη` is set to zero.
pub fn lowfreq_alpha_beta(coeffs: &LowFreqCoeffs, omega: f64, q_int: f64) -> BogoliubovPair {
    let root = omega.sqrt();
    let drift = I * (q_int / root);
    let (c1, c2) = (coeffs.c1, coeffs.c2);
    BogoliubovPair::new(c1 * (root - drift) + c2 / root, c1 * (root + drift) - c2 / root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    struct Profile<F, G, H>(F, G, H);

    impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64, H: Fn(f64) -> f64> ModeBackground for Profile<F, G, H> {
        fn omega(&self, s: f64) -> f64 {
            (self.0)(s)
        }
        fn omega_prime(&self, s: f64) -> f64 {
            (self.1)(s)
        }
        fn q(&self, s: f64) -> f64 {
            (self.2)(s)
        }
    }

    #[test]
    fn mode_quantities() {
        let p = BogoliubovPair::vacuum();
        assert_eq!((p.wronskian(), p.particle_number()), (1.0, 0.0));
        let p = BogoliubovPair::new(c(2f64.sqrt(), 0.0), c(1.0, 0.0));
        assert!((p.wronskian() - 1.0).abs() < 1e-15);
        assert!((p.particle_number() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_mode_has_unit_wronskian() {
        let (f, fd) = BogoliubovPair::vacuum().mode(3.0);
        assert!((mode_wronskian(f, fd) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lowfreq_coeff_examples() {
        let v = BogoliubovPair::vacuum();
        let k = lowfreq_coeffs(4.0, &v).unwrap();
        assert!((k.c1 - c(0.25, 0.0)).norm() < 1e-15 && (k.c2 - c(1.0, 0.0)).norm() < 1e-15);
        let k = lowfreq_coeffs(1.0, &v).unwrap();
        assert!((k.c1 - c(0.5, 0.0)).norm() < 1e-15 && (k.c2 - c(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(lowfreq_coeffs(0.0, &v), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn lowfreq_pair_examples() {
        let k = lowfreq_coeffs(2.5, &BogoliubovPair::vacuum()).unwrap();
        let p = lowfreq_alpha_beta(&k, 2.5, 0.0);
        assert!((p.alpha - c(1.0, 0.0)).norm() < 1e-15 && p.beta.norm() < 1e-15);
        let p = lowfreq_alpha_beta(&k, 5.0, 0.0);
        assert!((p.particle_number() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn static_background_creates_nothing() {
        let bg = Profile(|_| 2.0, |_| 0.0, |_| 0.0);
        let tr = evolve_bogoliubov(&bg, BogoliubovPair::vacuum(), (0.0, 10.0), &OdeOptions::with_tol(1e-10).dense(0.5)).unwrap();
        let last = tr.last().unwrap();
        assert!((last.alpha - c(1.0, 0.0)).norm() < 1e-12 && last.beta.norm() < 1e-12);
        assert!((last.phase_integral - 20.0).abs() < 1e-9);
    }

    #[test]
    fn instantaneous_vacuum_in_static_background() {
        let kin = |_t: f64| RingKinematics::new(1.0, 0.0, 0.0);
        let w = 2.0;
        let tr = evolve_mode_exact(w, kin, 0.0, (0.0, 5.0), ModeInit::InstantaneousVacuum, &OdeOptions::with_tol(1e-11).dense(0.25)).unwrap();
        for s in &tr {
            let exact = Complex64::from_polar((2.0 * w).powf(-0.5), -w * s.t);
            assert!((s.f - exact).norm() < 1e-10, "t={}", s.t);
        }
        let wkb = wkb_mode_solution(w, kin, 0.0, 0.0, 5.0).unwrap();
        assert!((wkb - tr.last().unwrap().f).norm() < 1e-10);
    }
}
