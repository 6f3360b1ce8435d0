//! Gaussian density matrix and Wigner function reconstructed from moments.
//!
//! Both objects are evaluated in two equivalent parameterizations: directly
//! from the moments, and through the (α, β, γ) coefficients of the density
//! matrix written in the variables Σ = (q+q′)/2, Δ = q − q′.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, MomentState};
use crate::quadrature::{midpoint_1d, midpoint_2d};

/// Half-width of quadrature boxes, in standard deviations.
pub const BOX_SIGMAS: f64 = 8.0;

/// Coefficients of the density matrix in (Σ, Δ):
/// α multiplies −Σ², γ multiplies −Δ², β multiplies iΣΔ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ABGamma {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn abgamma(state: &MomentState, params: &ModelParams) -> Result<ABGamma> {
    if !(state.sqq > 0.0) {
        return Err(Error::NonPositiveVariance(state.sqq));
    }
    let hbar = params.hbar;
    Ok(ABGamma {
        alpha: 1.0 / (2.0 * state.sqq),
        beta: state.spq / (hbar * state.sqq),
        gamma: state.sigma() / (2.0 * hbar * hbar * state.sqq),
    })
}

/// A density-matrix element `re + i·im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    /// `scale · exp(re_exp + i·im_exp)`.
    fn scaled_exp(scale: f64, re_exp: f64, im_exp: f64) -> Self {
        let mag = scale * re_exp.exp();
        let (s, c) = im_exp.sin_cos();
        Self {
            re: mag * c,
            im: mag * s,
        }
    }

    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// ⟨q|ρ|q′⟩ from the moments.
pub fn density_matrix_at(
    state: &MomentState,
    params: &ModelParams,
    q: f64,
    q_prime: f64,
) -> ComplexAmplitude {
    let hbar = params.hbar;
    let sum = 0.5 * (q + q_prime) - state.sq;
    let diff = q - q_prime;
    let re = -sum * sum / (2.0 * state.sqq)
        - state.sigma() / (2.0 * hbar * hbar * state.sqq) * diff * diff;
    let im = state.spq / (hbar * state.sqq) * sum * diff + state.sp * diff / hbar;
    ComplexAmplitude::scaled_exp((2.0 * PI * state.sqq).sqrt().recip(), re, im)
}

/// ⟨q|ρ|q′⟩ through the (α, β, γ) form in the variables Σ and Δ.
pub fn density_matrix_sigma_delta(
    coef: &ABGamma,
    state: &MomentState,
    params: &ModelParams,
    sum: f64,
    diff: f64,
) -> ComplexAmplitude {
    let ABGamma { alpha, beta, gamma } = *coef;
    let sq = state.sq;
    let re = -alpha * sum * sum - gamma * diff * diff + 2.0 * alpha * sq * sum - alpha * sq * sq;
    let im = beta * sum * diff + (state.sp / params.hbar - beta * sq) * diff;
    ComplexAmplitude::scaled_exp((alpha / PI).sqrt(), re, im)
}

/// W(q, p) as a bivariate Gaussian in the moments.
pub fn wigner_at(state: &MomentState, _params: &ModelParams, q: f64, p: f64) -> f64 {
    let sigma = state.sigma();
    let dq = q - state.sq;
    let dp = p - state.sp;
    let quad = state.spp * dq * dq + state.sqq * dp * dp - 2.0 * state.spq * dq * dp;
    (-quad / (2.0 * sigma)).exp() / (2.0 * PI * sigma.sqrt())
}

/// W(q, p) through the (α, β, γ) form.
pub fn wigner_abgamma(
    coef: &ABGamma,
    state: &MomentState,
    params: &ModelParams,
    q: f64,
    p: f64,
) -> f64 {
    let hbar = params.hbar;
    let ABGamma { alpha, beta, gamma } = *coef;
    let dq = q - state.sq;
    let dp = p - state.sp;
    let ridge = hbar * beta * dq - dp;
    (alpha / gamma).sqrt() / (2.0 * PI * hbar)
        * (-ridge * ridge / (4.0 * hbar * hbar * gamma) - alpha * dq * dq).exp()
}

/// Thermal steady-state density matrix of the Gibbs bath.
pub fn stationary_density(params: &ModelParams, q: f64, q_prime: f64) -> ComplexAmplitude {
    let ModelParams {
        m,
        omega,
        hbar,
        coth_eps: c,
        ..
    } = *params;
    let s = q + q_prime;
    let d = q - q_prime;
    let norm = (m * omega / (PI * hbar * c)).sqrt();
    let re = -m * omega / (4.0 * hbar) * (s * s / c + d * d * c);
    ComplexAmplitude::scaled_exp(norm, re, 0.0)
}

/// Thermal steady-state Wigner function.
pub fn stationary_wigner(params: &ModelParams, q: f64, p: f64) -> f64 {
    let ModelParams {
        m,
        omega,
        hbar,
        coth_eps: c,
        ..
    } = *params;
    (-(m * omega * q * q + p * p / (m * omega)) / (hbar * c)).exp() / (PI * hbar * c)
}

/// Wigner transform of [`density_matrix_at`] by midpoint quadrature over Δ:
/// W(q, p) = (2πħ)⁻¹ ∫ ρ(q + y/2, q − y/2) e^{−ipy/ħ} dy.
pub fn wigner_transform_numeric(
    state: &MomentState,
    params: &ModelParams,
    q: f64,
    p: f64,
    n: usize,
) -> f64 {
    let hbar = params.hbar;
    let gamma = state.sigma() / (2.0 * hbar * hbar * state.sqq);
    let half = BOX_SIGMAS / (2.0 * gamma).sqrt();
    let integrand = |y: f64| {
        let rho = density_matrix_at(state, params, q + 0.5 * y, q - 0.5 * y);
        let (s, c) = (-p * y / hbar).sin_cos();
        rho.re * c - rho.im * s
    };
    midpoint_1d(integrand, -half, half, n) / (2.0 * PI * hbar)
}

/// ∫ρ(q, q) dq over ±8 standard deviations.
pub fn trace_quadrature(state: &MomentState, params: &ModelParams, n: usize) -> f64 {
    let half = BOX_SIGMAS * state.sqq.sqrt();
    midpoint_1d(
        |q| density_matrix_at(state, params, q, q).re,
        state.sq - half,
        state.sq + half,
        n,
    )
}

/// Tr ρ² = ∫∫ |ρ(q, q′)|² dq dq′ over a ±8 standard-deviation box.
pub fn purity_quadrature(state: &MomentState, params: &ModelParams, n: usize) -> f64 {
    let half = BOX_SIGMAS * state.sqq.sqrt();
    let range = (state.sq - half, state.sq + half);
    midpoint_2d(
        |q, qp| density_matrix_at(state, params, q, qp).norm_sqr(),
        range,
        range,
        n,
        n,
    )
}

/// ∫∫ W dq dp over a ±8 standard-deviation box.
pub fn wigner_norm_quadrature(state: &MomentState, params: &ModelParams, n: usize) -> f64 {
    let hq = BOX_SIGMAS * state.sqq.sqrt();
    let hp = BOX_SIGMAS * state.spp.sqrt();
    midpoint_2d(
        |q, p| wigner_at(state, params, q, p),
        (state.sq - hq, state.sq + hq),
        (state.sp - hp, state.sp + hp),
        n,
        n,
    )
}

/// Purity of a Gaussian state, ħ/(2√σ).
pub fn gaussian_purity(state: &MomentState, params: &ModelParams) -> f64 {
    params.hbar / (2.0 * state.sigma().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_covariance, InitialGaussian};
    use crate::moments::asymptotic_covariance;

    fn sample_state() -> (MomentState, ModelParams) {
        let params = ModelParams::new(0.1, 0.02, 2.0).with_oscillator(1.2, 0.9, 0.8);
        let state = MomentState {
            t: 1.0,
            sq: 0.4,
            sp: -0.7,
            sqq: 0.9,
            spp: 0.6,
            spq: 0.25,
        };
        (state, params)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn abgamma_of_coherent_state() {
        let params = ModelParams::default();
        let s = initial_covariance(&InitialGaussian::coherent(), &params).unwrap();
        let c = abgamma(&s, &params).unwrap();
        assert_eq!((c.alpha, c.gamma, c.beta), (1.0, 0.25, 0.0));
    }

    #[test]
    fn abgamma_initial_gamma_is_positive() {
        let params = ModelParams::default().with_oscillator(2.0, 1.5, 0.5);
        for (delta, r) in [(0.5, 0.3), (3.0, -0.8), (1.0, 0.0)] {
            let s = initial_covariance(&InitialGaussian::new(delta, r), &params).unwrap();
            let c = abgamma(&s, &params).unwrap();
            let expected = params.m * params.omega / (4.0 * params.hbar * delta);
            assert!(close(c.gamma, expected, 1e-14));
            assert!(c.gamma >= c.alpha / 4.0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn abgamma_of_thermal_state() {
        let params = ModelParams::new(0.1, 0.0, 3.0);
        let c = abgamma(&asymptotic_covariance(&params).unwrap(), &params).unwrap();
        assert!(close(c.alpha, 1.0 / 3.0, 1e-15));
        assert!(close(c.gamma, 0.75, 1e-15));
        assert_eq!(c.beta, 0.0);
    }

    #[test]
    fn abgamma_rejects_bad_variance() {
        let (mut s, p) = sample_state();
        s.sqq = 0.0;
        assert!(abgamma(&s, &p).is_err());
    }

    #[test]
    fn density_peak_is_real() {
        let (s, p) = sample_state();
        let v = density_matrix_at(&s, &p, s.sq, s.sq);
        assert!(close(v.re, (2.0 * PI * s.sqq).sqrt().recip(), 1e-15));
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn both_density_forms_agree() {
        let (s, p) = sample_state();
        let c = abgamma(&s, &p).unwrap();
        for (q, qp) in [(0.0, 0.0), (1.3, -0.4), (-2.0, 0.7), (0.4, 0.41)] {
            let a = density_matrix_at(&s, &p, q, qp);
            let b = density_matrix_sigma_delta(&c, &s, &p, 0.5 * (q + qp), q - qp);
            let scale = a.norm_sqr().sqrt();
            assert!((a.re - b.re).abs() <= 1e-12 * scale, "{a:?} {b:?}");
            assert!((a.im - b.im).abs() <= 1e-12 * scale, "{a:?} {b:?}");
        }
    }

    #[test]
    fn both_wigner_forms_agree_and_peak() {
        let (s, p) = sample_state();
        let c = abgamma(&s, &p).unwrap();
        for (q, mom) in [(0.4, -0.7), (1.0, 0.2), (-1.5, -2.0)] {
            let a = wigner_at(&s, &p, q, mom);
            let b = wigner_abgamma(&c, &s, &p, q, mom);
            assert!(close(a, b, 1e-12), "{a} {b}");
        }
        let peak = wigner_at(&s, &p, s.sq, s.sp);
        assert!(close(peak, 1.0 / (2.0 * PI * s.sigma().sqrt()), 1e-15));
    }

    #[test]
    fn stationary_density_examples() {
        let params = ModelParams::new(0.1, 0.0, 2.0);
        let v = stationary_density(&params, 0.0, 0.0);
        assert!(close(v.re, (1.0 / (PI * 2.0)).sqrt(), 1e-15));

        // T = 0: ground-state projector ψ0(q)ψ0(q′)
        let cold = ModelParams::new(0.1, 0.0, 1.0).with_oscillator(1.5, 0.8, 0.6);
        let (m, w, h) = (cold.m, cold.omega, cold.hbar);
        for (q, qp) in [(0.3, -0.2), (1.0, 0.5)] {
            let psi = |x: f64| (m * w / (PI * h)).powf(0.25) * (-m * w * x * x / (2.0 * h)).exp();
            let v = stationary_density(&cold, q, qp);
            assert!(close(v.re, psi(q) * psi(qp), 1e-14));
        }

        let inf = asymptotic_covariance(&params).unwrap();
        let a = stationary_density(&params, 0.3, -0.2);
        let b = density_matrix_at(&inf, &params, 0.3, -0.2);
        assert!(close(a.re, b.re, 1e-12) && b.im == 0.0);
    }

    #[test]
    fn stationary_wigner_examples() {
        let params = ModelParams::new(0.1, 0.0, 2.0);
        assert!(close(
            stationary_wigner(&params, 0.0, 0.0),
            1.0 / (2.0 * PI),
            1e-15
        ));
        let expect = (-0.5f64).exp() / (2.0 * PI);
        assert!(close(stationary_wigner(&params, 1.0, 0.0), expect, 1e-15));
        let inf = asymptotic_covariance(&params).unwrap();
        for (q, p) in [(0.5, -0.5), (2.0, 1.0)] {
            assert!(close(
                stationary_wigner(&params, q, p),
                wigner_at(&inf, &params, q, p),
                1e-12
            ));
        }
    }

    #[test]
    fn hermiticity() {
        let (s, p) = sample_state();
        for (q, qp) in [(0.1, 1.2), (-0.9, 0.3), (2.0, -1.0)] {
            let a = density_matrix_at(&s, &p, q, qp);
            let b = density_matrix_at(&s, &p, qp, q).conj();
            assert!((a.re - b.re).abs() < 1e-15 && (a.im - b.im).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization() {
        let (s, p) = sample_state();
        assert!((trace_quadrature(&s, &p, 2048) - 1.0).abs() < 1e-8);
        assert!((wigner_norm_quadrature(&s, &p, 1024) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn numeric_wigner_transform_matches() {
        let (s, p) = sample_state();
        for i in 0..5 {
            for j in 0..5 {
                let q = s.sq + (i as f64 - 2.0) * 0.5;
                let mom = s.sp + (j as f64 - 2.0) * 0.5;
                let num = wigner_transform_numeric(&s, &p, q, mom, 1024);
                assert!(
                    (num - wigner_at(&s, &p, q, mom)).abs() < 1e-6,
                    "({q},{mom})"
                );
            }
        }
    }
}
