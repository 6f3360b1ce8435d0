//! Dormand–Prince 5(4) integrator with step-size control and continuous
//! (dense) output.
//!
//! Works on fixed-size states `[f64; N]` and integrates in either time
//! direction; the direction is taken from the requested output times.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed |h|; `None` means the whole span.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: None,
            max_steps: 10_000_000,
        }
    }
}

/// Step statistics of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest normalized local error estimate among accepted steps (≤ 1).
    pub max_error_estimate: f64,
}

impl StepStats {
    pub fn absorb(&mut self, other: &StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
        self.max_error_estimate = self.max_error_estimate.max(other.max_error_estimate);
    }
}

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

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension (Hairer & Wanner, DOPRI5 `contd5`)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..N {
            out[i] += h * coef * k[i];
        }
    }
    out
}

fn error_norm<const N: usize>(
    y0: &[f64; N],
    y1: &[f64; N],
    err: &[f64; N],
    opts: &Dopri5Options,
) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let scale = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / scale).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` and returns the solution at each
/// of `outputs`, which must be strictly monotone and lie on one side of `t0`
/// (the first entry may equal `t0`).
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    opts: &Dopri5Options,
) -> Result<(Vec<[f64; N]>, StepStats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut stats = StepStats::default();
    let Some(&t_last) = outputs.last() else {
        return Ok((Vec::new(), stats));
    };
    let dir = if t_last >= t0 { 1.0 } else { -1.0 };
    let mut prev = t0;
    for &t in outputs {
        if !t.is_finite() || (t - prev) * dir < 0.0 || (t == prev && t != outputs[0]) {
            return Err(Error::TimeGrid(format!(
                "output times must be finite and strictly monotone from t0 = {t0}"
            )));
        }
        prev = t;
    }
    if (outputs[0] - t0) * dir < 0.0 {
        return Err(Error::TimeGrid(format!(
            "first output {} precedes t0 = {t0}",
            outputs[0]
        )));
    }

    let span = (t_last - t0).abs();
    let mut out = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] == t0 {
        out.push(y0);
        next_out += 1;
    }
    if next_out == outputs.len() {
        return Ok((out, stats));
    }

    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.rhs_evals += 1;
    let mut h = dir * initial_step(&f, t, &y, &k1, dir, h_max, opts, &mut stats);

    let mut last_err = 1e-4_f64;
    while next_out < outputs.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        // don't overshoot the final output
        if (t + h - t_last) * dir > 0.0 {
            h = t_last - t;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }

        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f(t + h, &y1);
        stats.rhs_evals += 6;

        let mut err = [0.0; N];
        for i in 0..N {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err_norm = match error_norm(&y, &y1, &err, opts) {
            e if e.is_finite() => e,
            _ => f64::INFINITY,
        };

        if err_norm <= 1.0 {
            stats.accepted += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err_norm);
            let t1 = if (t + h - t_last) * dir >= 0.0 {
                t_last
            } else {
                t + h
            };

            // dense output for every requested time inside (t, t1]
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let dy = y1[i] - y[i];
                let bspl = h * k1[i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - h * k7[i] - bspl;
                cont[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            while next_out < outputs.len() && (outputs[next_out] - t1) * dir <= 0.0 {
                let to = outputs[next_out];
                if to == t1 {
                    out.push(y1);
                } else {
                    let theta = (to - t) / h;
                    let theta1 = 1.0 - theta;
                    let mut yi = [0.0; N];
                    for i in 0..N {
                        yi[i] = cont[0][i]
                            + theta
                                * (cont[1][i]
                                    + theta1
                                        * (cont[2][i]
                                            + theta * (cont[3][i] + theta1 * cont[4][i])));
                    }
                    out.push(yi);
                }
                next_out += 1;
            }

            t = t1;
            y = y1;
            k1 = k7;

            // PI step-size controller
            let fac = 0.9 * err_norm.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
            last_err = err_norm.max(1e-4);
            h = (h * fac.clamp(0.2, 10.0)).abs().min(h_max) * dir;
        } else {
            stats.rejected += 1;
            let fac = 0.9 * err_norm.powf(-0.2);
            h *= fac.clamp(0.2, 1.0);
        }
    }
    Ok((out, stats))
}

#[allow(clippy::too_many_arguments)]
fn initial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    dir: f64,
    h_max: f64,
    opts: &Dopri5Options,
    stats: &mut StepStats,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let scale = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let norm = |v: &[f64; N]| -> f64 {
        ((0..N).map(|i| (v[i] / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(k1);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(h_max);
    let y1 = axpy(y, dir * h0, &[(1.0, k1)]);
    let k2 = f(t + dir * h0, &y1);
    stats.rhs_evals += 1;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = k2[i] - k1[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(h_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn harmonic_rotation_matches_cos_sin() {
        let ts: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
        let (ys, stats) =
            integrate(rotation, 0.0, [1.0, 0.0], &ts, &Dopri5Options::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-8, "t={t}");
        }
        assert!(stats.accepted > 0);
        assert!(stats.max_error_estimate <= 1.0);
    }

    #[test]
    fn dense_output_between_steps_is_accurate() {
        // big h_max so many outputs fall inside single steps
        let ts: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.003).collect();
        let (ys, stats) =
            integrate(rotation, 0.0, [1.0, 0.0], &ts, &Dopri5Options::default()).unwrap();
        assert!(stats.accepted < ts.len());
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn integrates_backward() {
        let (ys, _) = integrate(
            |_t, y: &[f64; 1]| [-0.5 * y[0]],
            0.0,
            [1.0],
            &[-1.0, -2.0],
            &Dopri5Options::default(),
        )
        .unwrap();
        assert!((ys[0][0] - 0.5f64.exp()).abs() < 1e-10);
        assert!((ys[1][0] - 1.0f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_monotone_outputs() {
        let r = integrate(
            rotation,
            0.0,
            [1.0, 0.0],
            &[1.0, 0.5],
            &Dopri5Options::default(),
        );
        assert!(matches!(r, Err(Error::TimeGrid(_))));
    }

    #[test]
    fn reports_step_underflow() {
        // finite-time blow-up y' = y^2, y(0) = 1 at t = 1
        let r = integrate(
            |_t, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            &[2.0],
            &Dopri5Options::default(),
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. })), "{r:?}");
    }
}
