//! Model parameters, Gibbs-bath diffusion coefficients and the correlated
//! coherent initial state.
//!
//! Temperature is carried as `coth_eps = coth(ħω / 2kT)` so that the T = 0
//! (`coth_eps = 1`) and T → ∞ limits are exact. Boltzmann's constant is folded
//! into the temperature: every temperature input is `kT` in energy units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Damping above this fraction of ω is flagged as outside the weak-coupling regime.
pub const WEAK_COUPLING_RATIO: f64 = 0.1;

/// Oscillator, dissipation and bath parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub omega: f64,
    pub hbar: f64,
    /// Friction constant λ.
    pub lambda: f64,
    /// Symplectic drift constant μ (units of frequency).
    pub mu: f64,
    /// Thermal factor coth(ħω/2kT) ≥ 1.
    pub coth_eps: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            omega: 1.0,
            hbar: 1.0,
            lambda: 0.0,
            mu: 0.0,
            coth_eps: 1.0,
        }
    }
}

impl ModelParams {
    /// Unit oscillator (m = ω = ħ = 1) with the given damping and thermal factor.
    pub fn new(lambda: f64, mu: f64, coth_eps: f64) -> Self {
        Self {
            lambda,
            mu,
            coth_eps,
            ..Self::default()
        }
    }

    pub fn with_oscillator(mut self, m: f64, omega: f64, hbar: f64) -> Self {
        self.m = m;
        self.omega = omega;
        self.hbar = hbar;
        self
    }

    /// Builds parameters from a bath temperature given as kT.
    pub fn from_temperature(
        m: f64,
        omega: f64,
        hbar: f64,
        lambda: f64,
        mu: f64,
        kt: f64,
    ) -> Result<Self> {
        let mut params = Self {
            m,
            omega,
            hbar,
            lambda,
            mu,
            coth_eps: 1.0,
        };
        params.coth_eps = coth_from_temperature(kt, &params)?;
        Ok(params)
    }

    /// ε = ħω/2kT recovered from the stored thermal factor.
    pub fn epsilon(&self) -> f64 {
        if self.coth_eps <= 1.0 {
            f64::INFINITY
        } else {
            // atanh(1/c)
            0.5 * ((self.coth_eps + 1.0) / (self.coth_eps - 1.0)).ln()
        }
    }

    /// Bath kT corresponding to `coth_eps` (0 at `coth_eps = 1`).
    pub fn kt(&self) -> f64 {
        let eps = self.epsilon();
        if eps.is_infinite() {
            0.0
        } else {
            self.hbar * self.omega / (2.0 * eps)
        }
    }

    /// Ω² = ω² − μ²; positive in the underdamped regime the closed forms assume.
    pub fn omega_mod_sq(&self) -> f64 {
        self.omega * self.omega - self.mu * self.mu
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (name, value) in [("m", self.m), ("omega", self.omega), ("hbar", self.hbar)] {
            if !(value > 0.0 && value.is_finite()) {
                report.error(name, format!("must be positive and finite, got {value}"));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            report.error("lambda", format!("must be >= 0, got {}", self.lambda));
        }
        if !self.mu.is_finite() {
            report.error("mu", format!("must be finite, got {}", self.mu));
        }
        if self.lambda < self.mu.abs() {
            report.error(
                "lambda",
                format!(
                    "lambda < |mu| ({} < {}) makes D_qq negative",
                    self.lambda,
                    self.mu.abs()
                ),
            );
        }
        if self.mu.abs() >= self.omega {
            report.error(
                "mu",
                format!(
                    "|mu| >= omega ({} >= {}) is overdamped",
                    self.mu.abs(),
                    self.omega
                ),
            );
        }
        if !(self.coth_eps >= 1.0) || self.coth_eps.is_infinite() {
            report.error(
                "coth_eps",
                format!("must be finite and >= 1, got {}", self.coth_eps),
            );
        }
        if self.omega > 0.0 && self.lambda > WEAK_COUPLING_RATIO * self.omega {
            report.warning(
                "lambda",
                format!(
                    "weak coupling violated: lambda/omega = {:.3} (should be << 1)",
                    self.lambda / self.omega
                ),
            );
        }
        report
    }

    /// Validates and converts hard errors into an `Err`.
    pub fn checked(self) -> Result<Self> {
        self.validate().into_result()?;
        Ok(self)
    }
}

/// Outcome of parameter validation: hard errors and soft warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ValidationReport {
    fn error(&mut self, field: &'static str, message: String) {
        self.errors.push(Issue { field, message });
    }

    fn warning(&mut self, field: &'static str, message: String) {
        self.warnings.push(Issue { field, message });
    }

    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
        self
    }

    /// First hard error, if any.
    pub fn into_result(self) -> Result<()> {
        match self.errors.into_iter().next() {
            None => Ok(()),
            Some(issue) => Err(Error::InvalidParameter {
                field: issue.field,
                reason: issue.message,
            }),
        }
    }
}

/// Validates model parameters and, when given, the initial state.
pub fn validate(params: &ModelParams, init: Option<&InitialGaussian>) -> ValidationReport {
    let report = params.validate();
    match init {
        Some(init) => report.merge(init.validate()),
        None => report,
    }
}

/// coth(ħω/2kT) for a bath at temperature `kt` (energy units).
///
/// Exactly 1 at kT = 0; for kT ≫ ħω the result approaches 2kT/ħω.
pub fn coth_from_temperature(kt: f64, params: &ModelParams) -> Result<f64> {
    if !(kt >= 0.0) || !kt.is_finite() {
        return Err(Error::InvalidTemperature(kt));
    }
    if kt == 0.0 {
        return Ok(1.0);
    }
    let eps = params.hbar * params.omega / (2.0 * kt);
    Ok(1.0 / eps.tanh())
}

/// Quantum diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionCoefficients {
    pub d_pp: f64,
    pub d_qq: f64,
    pub d_pq: f64,
}

/// Diffusion coefficients for which the asymptotic state is the Gibbs state.
pub fn gibbs_coefficients(params: &ModelParams) -> DiffusionCoefficients {
    let ModelParams {
        m,
        omega,
        hbar,
        lambda,
        mu,
        coth_eps,
    } = *params;
    DiffusionCoefficients {
        d_pp: 0.5 * (lambda + mu) * hbar * m * omega * coth_eps,
        d_qq: 0.5 * (lambda - mu) * hbar / (m * omega) * coth_eps,
        d_pq: 0.0,
    }
}

/// Correlated (squeezed) coherent state parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialGaussian {
    /// Squeezing δ > 0.
    pub delta: f64,
    /// Position-momentum correlation coefficient, |r| < 1.
    pub r: f64,
    pub q0: f64,
    pub p0: f64,
}

impl Default for InitialGaussian {
    fn default() -> Self {
        Self::coherent()
    }
}

impl InitialGaussian {
    pub fn new(delta: f64, r: f64) -> Self {
        Self {
            delta,
            r,
            q0: 0.0,
            p0: 0.0,
        }
    }

    /// Glauber coherent state at the origin.
    pub fn coherent() -> Self {
        Self::new(1.0, 0.0)
    }

    pub fn centered_at(mut self, q0: f64, p0: f64) -> Self {
        self.q0 = q0;
        self.p0 = p0;
        self
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            report.error("delta", format!("must be positive, got {}", self.delta));
        }
        if !(self.r.abs() < 1.0) {
            report.error("r", format!("|r| must be < 1, got {}", self.r));
        }
        if !self.q0.is_finite() || !self.p0.is_finite() {
            report.error("q0/p0", "initial means must be finite".to_string());
        }
        report
    }

    /// r/√(1−r²).
    pub fn r_ratio(&self) -> f64 {
        self.r / (1.0 - self.r * self.r).sqrt()
    }
}

/// Gaussian state at time `t`: means and second central moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub t: f64,
    pub sq: f64,
    pub sp: f64,
    pub sqq: f64,
    pub spp: f64,
    pub spq: f64,
}

impl MomentState {
    /// Schrödinger generalized uncertainty function σ = σ_qq σ_pp − σ_pq².
    pub fn sigma(&self) -> f64 {
        self.sqq * self.spp - self.spq * self.spq
    }

    pub(crate) fn to_array(self) -> [f64; 5] {
        [self.sq, self.sp, self.sqq, self.spp, self.spq]
    }

    pub(crate) fn from_array(t: f64, y: [f64; 5]) -> Self {
        Self {
            t,
            sq: y[0],
            sp: y[1],
            sqq: y[2],
            spp: y[3],
            spq: y[4],
        }
    }

    /// Same state translated by (dq, dp).
    pub fn shifted(mut self, dq: f64, dp: f64) -> Self {
        self.sq += dq;
        self.sp += dp;
        self
    }
}

/// Moments of the correlated coherent state at t = 0.
pub fn initial_covariance(init: &InitialGaussian, params: &ModelParams) -> Result<MomentState> {
    init.validate().into_result()?;
    let ModelParams { m, omega, hbar, .. } = *params;
    let one_minus_r2 = 1.0 - init.r * init.r;
    Ok(MomentState {
        t: 0.0,
        sq: init.q0,
        sp: init.p0,
        sqq: hbar * init.delta / (2.0 * m * omega),
        spp: hbar * m * omega / (2.0 * init.delta * one_minus_r2),
        spq: hbar * init.r / (2.0 * one_minus_r2.sqrt()),
    })
}
