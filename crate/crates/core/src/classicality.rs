//! Classicality diagnostics: degree of quantum decoherence, degree of
//! classical correlations, decoherence and thermal-fluctuation time scales,
//! and the time windows in which both classicality conditions hold.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{initial_covariance, InitialGaussian, ModelParams, MomentState};
use crate::moments::{evolve, evolve_to, MomentTrajectory};
use crate::states::{abgamma, ABGamma};

/// Resolution of window endpoints, in units of 1/ω.
pub const WINDOW_RESOLUTION: f64 = 1e-3;

/// Largest spacing, in units of 1/ω, at which windows are scanned.
pub const WINDOW_SCAN_STEP: f64 = 5e-3;

/// Relative size (against √(σ_qq σ_pp)) below which σ_pq counts as zero.
pub const ZERO_CORRELATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalityThresholds {
    pub qd_max: f64,
    pub cc_max: f64,
}

impl Default for ClassicalityThresholds {
    fn default() -> Self {
        Self {
            qd_max: 0.9,
            cc_max: 10.0,
        }
    }
}

impl ClassicalityThresholds {
    pub fn new(qd_max: f64, cc_max: f64) -> Result<Self> {
        if !(qd_max > 0.0 && qd_max < 1.0) {
            return Err(Error::InvalidParameter {
                field: "qd_max",
                reason: format!("must lie in (0, 1), got {qd_max}"),
            });
        }
        if !(cc_max > 0.0) || !cc_max.is_finite() {
            return Err(Error::InvalidParameter {
                field: "cc_max",
                reason: format!("must be positive, got {cc_max}"),
            });
        }
        Ok(Self { qd_max, cc_max })
    }
}

/// Degree of classical correlations; undefined when σ_pq vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaCc {
    Value(f64),
    NoCorrelations,
}

impl DeltaCc {
    pub fn value(self) -> Option<f64> {
        match self {
            DeltaCc::Value(v) => Some(v),
            DeltaCc::NoCorrelations => None,
        }
    }

    pub fn at_most(self, bound: f64) -> bool {
        matches!(self, DeltaCc::Value(v) if v <= bound)
    }
}

/// Degree of quantum decoherence ħ/(2√σ): 1 for a pure state, → 0 as
/// coherences are lost.
pub fn delta_qd(state: &MomentState, params: &ModelParams) -> f64 {
    params.hbar / (2.0 * state.sigma().sqrt())
}

/// Ratio of off-diagonal to diagonal dispersion, ½√(α/γ).
pub fn delta_qd_abgamma(coef: &ABGamma) -> f64 {
    0.5 * (coef.alpha / coef.gamma).sqrt()
}

/// Degree of classical correlations √σ/|σ_pq|.
pub fn delta_cc(state: &MomentState, _params: &ModelParams) -> DeltaCc {
    if state.spq.abs() <= ZERO_CORRELATION * (state.sqq * state.spp).sqrt() {
        DeltaCc::NoCorrelations
    } else {
        DeltaCc::Value(state.sigma().sqrt() / state.spq.abs())
    }
}

/// Relative sharpness of the Wigner ridge, 2√(αγ)/|β|.
pub fn delta_cc_abgamma(coef: &ABGamma) -> DeltaCc {
    if coef.beta == 0.0 {
        DeltaCc::NoCorrelations
    } else {
        DeltaCc::Value(2.0 * (coef.alpha * coef.gamma).sqrt() / coef.beta.abs())
    }
}

/// A time scale that may be infinite (no decay).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeValue {
    Finite(f64),
    Infinite,
}

impl TimeValue {
    fn from_rate(rate: f64) -> Self {
        if rate > 0.0 {
            TimeValue::Finite(1.0 / rate)
        } else {
            TimeValue::Infinite
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            TimeValue::Finite(v) => Some(v),
            TimeValue::Infinite => None,
        }
    }
}

impl Serialize for TimeValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeValue::Finite(v) => s.serialize_f64(*v),
            TimeValue::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Which closed-form expression a time scale corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaBranch {
    /// General decoherence time.
    DecoherenceGeneral,
    /// Uncorrelated initial state, r = 0.
    DecoherenceUncorrelated,
    /// r = 0 at zero temperature with μ = 0.
    DecoherenceZeroTemperature,
    /// Time after which thermal fluctuations match quantum fluctuations.
    ThermalGeneral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeScaleResult {
    pub value: TimeValue,
    pub formula_branch: FormulaBranch,
}

/// r²/(δ(1−r²)).
fn r2_term(init: &InitialGaussian) -> f64 {
    init.r * init.r / (init.delta * (1.0 - init.r * init.r))
}

/// Initial exponential decay rate of the density-matrix coherences
/// (d ln γ/dt at t = 0). Zero or negative means no decoherence.
pub fn decoherence_rate(params: &ModelParams, init: &InitialGaussian) -> f64 {
    let ModelParams {
        omega,
        lambda,
        mu,
        coth_eps: c,
        ..
    } = *params;
    let delta = init.delta;
    let r2 = r2_term(init);
    2.0 * (lambda * (delta + r2) * c + mu * (delta - r2) * c
        - lambda
        - mu
        - omega * init.r_ratio() / delta)
}

/// Decoherence time 1/rate, tagged with the special case the inputs fall in.
pub fn decoherence_time(params: &ModelParams, init: &InitialGaussian) -> TimeScaleResult {
    let formula_branch = if init.r != 0.0 {
        FormulaBranch::DecoherenceGeneral
    } else if params.coth_eps == 1.0 && params.mu == 0.0 {
        FormulaBranch::DecoherenceZeroTemperature
    } else {
        FormulaBranch::DecoherenceUncorrelated
    };
    TimeScaleResult {
        value: TimeValue::from_rate(decoherence_rate(params, init)),
        formula_branch,
    }
}

/// Decoherence time of an uncorrelated (r = 0) initial state.
pub fn decoherence_time_uncorrelated(params: &ModelParams, delta: f64) -> TimeValue {
    TimeValue::from_rate(2.0 * (params.lambda + params.mu) * (delta * params.coth_eps - 1.0))
}

/// Decoherence time at T = 0 with μ = 0 and r = 0.
pub fn decoherence_time_zero_temperature(lambda: f64, delta: f64) -> TimeValue {
    TimeValue::from_rate(2.0 * lambda * (delta - 1.0))
}

/// τ = 1/ε = 2kT/ħω.
pub fn high_temperature_tau(params: &ModelParams) -> f64 {
    1.0 / params.epsilon()
}

/// High-temperature form of the decoherence time.
pub fn decoherence_time_high_t(params: &ModelParams, init: &InitialGaussian) -> TimeValue {
    let r2 = r2_term(init);
    let tau = high_temperature_tau(params);
    let delta = init.delta;
    TimeValue::from_rate(2.0 * (params.lambda * (delta + r2) + params.mu * (delta - r2)) * tau)
}

/// High-temperature decoherence time for r = 0: ħω/(4(λ+μ)δkT).
pub fn decoherence_time_high_t_uncorrelated(params: &ModelParams, delta: f64) -> TimeValue {
    let denom = 4.0 * (params.lambda + params.mu) * delta * params.kt();
    if denom > 0.0 {
        TimeValue::Finite(params.hbar * params.omega / denom)
    } else {
        TimeValue::Infinite
    }
}

fn thermal_bracket(params: &ModelParams, init: &InitialGaussian) -> (f64, f64) {
    let inv = 1.0 / (init.delta * (1.0 - init.r * init.r));
    let x = params.lambda * (init.delta + inv) + params.mu * (init.delta - inv);
    (x, 2.0 * params.lambda)
}

/// Time after which thermal fluctuations become comparable with quantum
/// fluctuations.
pub fn thermal_time(params: &ModelParams, init: &InitialGaussian) -> TimeScaleResult {
    let (x, y) = thermal_bracket(params, init);
    TimeScaleResult {
        value: TimeValue::from_rate(2.0 * (x * params.coth_eps - y)),
        formula_branch: FormulaBranch::ThermalGeneral,
    }
}

/// High-temperature form of [`thermal_time`].
pub fn thermal_time_high_t(params: &ModelParams, init: &InitialGaussian) -> TimeValue {
    let (x, _) = thermal_bracket(params, init);
    TimeValue::from_rate(2.0 * high_temperature_tau(params) * x)
}

/// d ln γ/dt at t = 0 by a central difference of width `h` on the ODE path,
/// with γ from the (α, β, γ) coefficients.
pub fn gamma_rate_fd(params: &ModelParams, init: &InitialGaussian, h: f64) -> Result<f64> {
    let s0 = initial_covariance(init, params)?;
    let plus = abgamma(&evolve_to(&s0, params, h)?, params)?.gamma;
    let minus = abgamma(&evolve_to(&s0, params, -h)?, params)?.gamma;
    Ok((plus.ln() - minus.ln()) / (2.0 * h))
}

/// Closed time interval in which both classicality conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalityWindow {
    pub start: f64,
    pub end: f64,
}

fn is_classical(state: &MomentState, params: &ModelParams, th: &ClassicalityThresholds) -> bool {
    delta_qd(state, params) <= th.qd_max && delta_cc(state, params).at_most(th.cc_max)
}

/// Maximal intervals where δ_QD ≤ qd_max and δ_CC ≤ cc_max hold together,
/// within the time span of `traj`.
///
/// The moment ODE is re-integrated from the first sample and scanned at
/// spacing [`WINDOW_SCAN_STEP`]/ω (or finer, between samples); each
/// transition is refined by bisection to [`WINDOW_RESOLUTION`]/ω. Windows
/// shorter than the scan spacing can be missed.
pub fn classicality_window(
    traj: &MomentTrajectory,
    params: &ModelParams,
    thresholds: &ClassicalityThresholds,
) -> Result<Vec<ClassicalityWindow>> {
    let samples = &traj.samples;
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Ok(Vec::new());
    };
    let resolution = WINDOW_RESOLUTION / params.omega;
    let scan = WINDOW_SCAN_STEP / params.omega;
    let mut times = vec![first.t];
    for pair in samples.windows(2) {
        let (a, b) = (pair[0].t, pair[1].t);
        let parts = ((b - a) / scan).ceil().max(1.0) as usize;
        times.extend((1..=parts).map(|k| {
            if k == parts {
                b
            } else {
                a + (b - a) * k as f64 / parts as f64
            }
        }));
    }
    let fine = evolve(first, params, &times)?.samples;
    let flags: Vec<bool> = fine
        .iter()
        .map(|s| is_classical(s, params, thresholds))
        .collect();

    let mut windows = Vec::new();
    let mut open = flags[0].then_some(first.t);
    for i in 1..fine.len() {
        if flags[i] == flags[i - 1] {
            continue;
        }
        let left = &fine[i - 1];
        let (mut lo, mut hi) = (left.t, fine[i].t);
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            let state = evolve_to(left, params, mid)?;
            if is_classical(&state, params, thresholds) == flags[i - 1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let crossing = 0.5 * (lo + hi);
        match open.take() {
            Some(start) => windows.push(ClassicalityWindow {
                start,
                end: crossing,
            }),
            None => open = Some(crossing),
        }
    }
    if let Some(start) = open {
        windows.push(ClassicalityWindow { start, end: last.t });
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{asymptotic_covariance, TrajectoryMeta};
    use crate::ode::StepStats;

    #[test]
    fn pure_state_is_fully_coherent() {
        let params = ModelParams::new(0.1, 0.0, 3.0).with_oscillator(1.0, 1.0, 0.6);
        let s = initial_covariance(&InitialGaussian::new(2.0, 0.5), &params).unwrap();
        assert!((delta_qd(&s, &params) - 1.0).abs() < 1e-14);
        let c = abgamma(&s, &params).unwrap();
        assert!((delta_qd_abgamma(&c) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn asymptotic_qd_is_tanh_eps() {
        let params = ModelParams::new(0.1, 0.0, 4.0);
        let inf = asymptotic_covariance(&params).unwrap();
        assert!((delta_qd(&inf, &params) - 0.25).abs() < 1e-15);
        assert_eq!(delta_cc(&inf, &params), DeltaCc::NoCorrelations);
    }

    #[test]
    fn pure_correlated_state_cc() {
        let params = ModelParams::default();
        for r in [0.9, -0.3, 0.05] {
            let s = initial_covariance(&InitialGaussian::new(1.3, r), &params).unwrap();
            let expected = (1.0 - r * r).sqrt() / r.abs();
            let v = delta_cc(&s, &params).value().unwrap();
            assert!((v - expected).abs() < 1e-13 * expected);
            let w = delta_cc_abgamma(&abgamma(&s, &params).unwrap())
                .value()
                .unwrap();
            assert!((w - v).abs() < 1e-12 * v);
        }
        let s = initial_covariance(&InitialGaussian::new(1.0, 0.9), &params).unwrap();
        assert!((delta_cc(&s, &params).value().unwrap() - 0.4843221048).abs() < 1e-9);
    }

    #[test]
    fn rate_examples() {
        let cold = ModelParams::new(0.1, 0.0, 1.0);
        assert_eq!(decoherence_rate(&cold, &InitialGaussian::coherent()), 0.0);
        assert_eq!(
            decoherence_time(&cold, &InitialGaussian::coherent()),
            TimeScaleResult {
                value: TimeValue::Infinite,
                formula_branch: FormulaBranch::DecoherenceZeroTemperature
            }
        );

        let p = ModelParams::new(0.1, 0.0, 2.0);
        let t = decoherence_time(&p, &InitialGaussian::new(2.0, 0.0));
        assert_eq!(t.formula_branch, FormulaBranch::DecoherenceUncorrelated);
        assert!((t.value.finite().unwrap() - 1.0 / 0.6).abs() < 1e-14);

        let p = ModelParams::new(0.1, 0.05, 3.0);
        let rate = decoherence_rate(&p, &InitialGaussian::new(1.5, 0.0));
        assert!((rate - 2.0 * 0.15 * (1.5 * 3.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn thermal_time_examples() {
        let p = ModelParams::new(0.1, 0.0, 3.0);
        let t = thermal_time(&p, &InitialGaussian::coherent())
            .value
            .finite()
            .unwrap();
        assert!((t - 1.0 / (4.0 * 0.1 * 2.0)).abs() < 1e-14);
        let cold = ModelParams::new(0.1, 0.0, 1.0);
        assert_eq!(
            thermal_time(&cold, &InitialGaussian::coherent()).value,
            TimeValue::Infinite
        );
    }

    #[test]
    fn thresholds_are_validated() {
        assert!(ClassicalityThresholds::new(1.0, 10.0).is_err());
        assert!(ClassicalityThresholds::new(0.5, 0.0).is_err());
        assert!(ClassicalityThresholds::new(0.5, 2.0).is_ok());
    }

    #[test]
    fn constant_thermal_trajectory_has_no_window() {
        let params = ModelParams::new(0.1, 0.0, 5.0);
        let mut inf = asymptotic_covariance(&params).unwrap();
        let samples = (0..20)
            .map(|i| {
                inf.t = i as f64;
                inf
            })
            .collect();
        let traj = MomentTrajectory {
            samples,
            meta: TrajectoryMeta {
                method: "constant".into(),
                rtol: 0.0,
                atol: 0.0,
                stats: StepStats::default(),
            },
        };
        let w = classicality_window(&traj, &params, &ClassicalityThresholds::default()).unwrap();
        assert!(w.is_empty());
    }
}
