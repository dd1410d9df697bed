use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("step size underflow at t = {t:e} (h = {h:e}){}", cause.as_ref().map(|c| format!(": {c}")).unwrap_or_default())]
    StepUnderflow { t: f64, h: f64, cause: Option<String> },
    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    NonConvergence { estimate: f64, error: f64, subdivisions: usize },
    #[error("extrapolation unstable: successive extrapolants differ by {spread:e} (tolerance {tol:e})")]
    ExtrapolationUnstable { spread: f64, tol: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zero frequency mode (k = 0, m = 0)")]
    ZeroFrequency,
    #[error("length {length:e} is at or below the critical length {critical:e}")]
    CriticalLength { length: f64, critical: f64 },
    #[error("effective mass {0:e} is singular")]
    EffectiveMassSingular(f64),
    #[error("singular linear system: {0}")]
    SingularSystem(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
