//! Independent reference computations for the integration tests. Nothing
//! here calls into the crate's numerics; only plain parameter structs are
//! shared.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Case {
    pub m: f64,
    pub omega: f64,
    pub hbar: f64,
    pub lambda: f64,
    pub mu: f64,
    pub coth: f64,
    pub delta: f64,
    pub r: f64,
}

impl Case {
    pub fn unit(lambda: f64, mu: f64, coth: f64, delta: f64, r: f64) -> Self {
        Self {
            m: 1.0,
            omega: 1.0,
            hbar: 1.0,
            lambda,
            mu,
            coth,
            delta,
            r,
        }
    }

    pub fn params(&self) -> dqho::ModelParams {
        dqho::ModelParams::new(self.lambda, self.mu, self.coth)
            .with_oscillator(self.m, self.omega, self.hbar)
    }

    pub fn init(&self) -> dqho::InitialGaussian {
        dqho::InitialGaussian::new(self.delta, self.r)
    }

    /// (σ_qq, σ_pp, σ_pq) of the squeezed correlated coherent state.
    pub fn initial(&self) -> [f64; 3] {
        let s = 1.0 - self.r * self.r;
        [
            self.hbar * self.delta / (2.0 * self.m * self.omega),
            self.hbar * self.m * self.omega / (2.0 * self.delta * s),
            self.hbar * self.r / (2.0 * s.sqrt()),
        ]
    }

    /// Second-moment equations obtained by taking moments of the Wigner
    /// Fokker-Planck equation with Gibbs diffusion.
    pub fn moment_rates(&self, y: [f64; 3]) -> [f64; 3] {
        let [xx, yy, xy] = y;
        let Case {
            m,
            omega,
            hbar,
            lambda,
            mu,
            coth,
            ..
        } = *self;
        let dqq = 0.5 * (lambda - mu) * hbar * coth / (m * omega);
        let dpp = 0.5 * (lambda + mu) * hbar * coth * m * omega;
        let k = m * omega * omega;
        [
            2.0 * xy / m - 2.0 * (lambda - mu) * xx + 2.0 * dqq,
            -2.0 * k * xy - 2.0 * (lambda + mu) * yy + 2.0 * dpp,
            yy / m - k * xx - 2.0 * lambda * xy,
        ]
    }
}

/// Classic fixed-step RK4 over the second moments, from 0 to `t`.
pub fn rk4_moments(case: &Case, t: f64, dt: f64) -> [f64; 3] {
    let steps = (t / dt).round() as usize;
    let h = t / steps as f64;
    let mut y = case.initial();
    for _ in 0..steps {
        y = step_rk4(case, y, h);
    }
    y
}

/// coth x from Lambert's continued fraction
/// x/(1 + x²/(3 + x²/(5 + ...))) = tanh x.
pub fn coth_continued_fraction(x: f64) -> f64 {
    let x2 = x * x;
    let mut tail = 0.0;
    for k in (0..40).rev() {
        tail = x2 / ((2 * k + 1) as f64 + tail);
    }
    // tail now holds x²/(1 + x²/(3 + ...)) = x tanh x
    x / tail
}

/// Classicality windows from a fixed-step RK4 scan at spacing `dt`; each
/// crossing is placed by linear interpolation of the limiting margin.
pub fn dense_scan_windows(
    case: &Case,
    qd_max: f64,
    cc_max: f64,
    t_end: f64,
    dt: f64,
) -> Vec<(f64, f64)> {
    let margin = |y: [f64; 3]| {
        let sigma = y[0] * y[1] - y[2] * y[2];
        let qd = case.hbar / (2.0 * sigma.sqrt()) - qd_max;
        let cc = sigma.sqrt() - cc_max * y[2].abs();
        qd.max(cc)
    };
    let steps = (t_end / dt).round() as usize;
    let mut y = case.initial();
    let mut prev = margin(y);
    let mut open = (prev <= 0.0).then_some(0.0);
    let mut windows = Vec::new();
    for i in 1..=steps {
        y = step_rk4(case, y, dt);
        let cur = margin(y);
        if (cur <= 0.0) != (prev <= 0.0) {
            let t = (i - 1) as f64 * dt + dt * prev / (prev - cur);
            match open.take() {
                Some(start) => windows.push((start, t)),
                None => open = Some(t),
            }
        }
        prev = cur;
    }
    if let Some(start) = open {
        windows.push((start, t_end));
    }
    windows
}

fn step_rk4(case: &Case, y: [f64; 3], h: f64) -> [f64; 3] {
    let add =
        |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = case.moment_rates(y);
    let k2 = case.moment_rates(add(y, k1, 0.5 * h));
    let k3 = case.moment_rates(add(y, k2, 0.5 * h));
    let k4 = case.moment_rates(add(y, k3, h));
    let mut out = y;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the validated box: δ ∈ [0.25, 4], |r| ≤ 0.9,
/// coth ∈ [1, 20], λ ∈ [0.01, 0.2]ω, |μ| ≤ λ, with ħ = m = ω = 1.
pub fn draw_case(rng: &mut ChaCha8Rng) -> Case {
    let lambda = rng.gen_range(0.01..=0.2);
    Case::unit(
        lambda,
        rng.gen_range(-lambda..=lambda),
        rng.gen_range(1.0..=20.0),
        rng.gen_range(0.25..=4.0),
        rng.gen_range(-0.9..=0.9),
    )
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
