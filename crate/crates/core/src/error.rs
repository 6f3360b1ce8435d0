use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("temperature must be non-negative and finite, got kT = {0}")]
    InvalidTemperature(f64),

    #[error("closed forms need |mu| < omega (Omega^2 = omega^2 - mu^2 = {omega_sq} <= 0)")]
    Overdamped { omega_sq: f64 },

    #[error("asymptotic state undefined without relaxation (lambda = 0)")]
    NoRelaxation,

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-positive position variance sigma_qq = {0}")]
    NonPositiveVariance(f64),

    #[error("phase-space box too small: {0}")]
    BoxTooSmall(String),

    #[error("grid too coarse: need at least {min} points per axis, got nq = {nq}, np = {np}")]
    GridTooCoarse { min: usize, nq: usize, np: usize },

    #[error("time step {dt:e} violates the CFL bound {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("horizon t_end = {t_end} exceeds the PDE cap {cap} (= {relaxations}/lambda)")]
    HorizonTooLong {
        t_end: f64,
        cap: f64,
        relaxations: f64,
    },

    #[error("mass drift {drift:e} at t = {t} exceeds {bound:e}")]
    MassDrift { t: f64, drift: f64, bound: f64 },

    #[error("non-positive discrete mass {0}")]
    NonPositiveMass(f64),
}

impl Error {
    /// True for failures of a numerical engine (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::CflViolation { .. }
                | Error::MassDrift { .. }
                | Error::NonPositiveMass(_)
        )
    }
}
