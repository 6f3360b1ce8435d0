//! Finite-difference integration of the Wigner-function Fokker-Planck
//! equation on a uniform (q, p) grid.
//!
//! The equation is written in conservative form,
//!
//! ∂W/∂t = −∂_q(v_q W) − ∂_p(v_p W) + D_qq ∂²_q W + D_pp ∂²_p W + 2 D_pq ∂_q∂_p W,
//!
//! with drift v_q = p/m − (λ−μ) q and v_p = −mω² q − (λ+μ) p. Advective fluxes
//! are evaluated on cell faces (centered or first-order upwind), diffusion with
//! the standard three-point stencil, and time is advanced with classical RK4.
//! Cells outside the box are treated as zero (Dirichlet).

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    gibbs_coefficients, initial_covariance, DiffusionCoefficients, InitialGaussian, ModelParams,
    MomentState,
};
use crate::moments::{asymptotic_covariance, MomentTrajectory, TrajectoryMeta};
use crate::ode::StepStats;
use crate::states::wigner_at;

pub const MIN_POINTS: usize = 64;
pub const MIN_BOX_SIGMAS: f64 = 6.0;
pub const CFL_SAFETY: f64 = 0.4;
pub const MASS_TOLERANCE: f64 = 1e-3;

/// Discretized Wigner function on cell centers, stored q-major
/// (`values[i * np + j]` ↔ (q_i, p_j)).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
    pub dq: f64,
    pub dp: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(q: (f64, f64), p: (f64, f64), nq: usize, np: usize) -> Result<Self> {
        if nq < MIN_POINTS || np < MIN_POINTS {
            return Err(Error::GridTooCoarse {
                min: MIN_POINTS,
                nq,
                np,
            });
        }
        if !(q.0 < q.1) || !(p.0 < p.1) {
            return Err(Error::BoxTooSmall(format!(
                "bounds not ordered: q {q:?}, p {p:?}"
            )));
        }
        Ok(Self {
            q_min: q.0,
            q_max: q.1,
            p_min: p.0,
            p_max: p.1,
            nq,
            np,
            dq: (q.1 - q.0) / nq as f64,
            dp: (p.1 - p.0) / np as f64,
            t: 0.0,
            values: vec![0.0; nq * np],
        })
    }

    /// Same geometry, values from `f(q, p)`.
    pub fn filled_with<F: Fn(f64, f64) -> f64 + Sync>(mut self, f: F) -> Self {
        let (q_min, dq, p_min, dp, np) = (self.q_min, self.dq, self.p_min, self.dp, self.np);
        self.values
            .par_chunks_mut(np)
            .enumerate()
            .for_each(|(i, row)| {
                let q = q_min + (i as f64 + 0.5) * dq;
                for (j, w) in row.iter_mut().enumerate() {
                    *w = f(q, p_min + (j as f64 + 0.5) * dp);
                }
            });
        self
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q_min + (i as f64 + 0.5) * self.dq
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (j as f64 + 0.5) * self.dp
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.np + j]
    }

    pub fn cell_area(&self) -> f64 {
        self.dq * self.dp
    }

    /// ∑ W dq dp.
    pub fn mass(&self) -> f64 {
        let rows: Vec<f64> = self
            .values
            .par_chunks(self.np)
            .map(|row| row.iter().sum::<f64>())
            .collect();
        rows.iter().sum::<f64>() * self.cell_area()
    }

    /// Cell center of the largest value.
    pub fn peak_cell(&self) -> (f64, f64) {
        let (k, _) =
            self.values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &w)| {
                    if w > best.1 {
                        (k, w)
                    } else {
                        best
                    }
                });
        (self.q(k / self.np), self.p(k % self.np))
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ∑ |W − f| dq dp against a reference function.
    pub fn l1_distance_to<F: Fn(f64, f64) -> f64 + Sync>(&self, f: F) -> f64 {
        let rows: Vec<f64> = self
            .values
            .par_chunks(self.np)
            .enumerate()
            .map(|(i, row)| {
                let q = self.q(i);
                row.iter()
                    .enumerate()
                    .map(|(j, w)| (w - f(q, self.p(j))).abs())
                    .sum::<f64>()
            })
            .collect();
        rows.iter().sum::<f64>() * self.cell_area()
    }

    /// Writes the grid as CSV: one `#` header line with geometry and time,
    /// then one line of `np` values per q index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# nq={} np={} q_min={:.16e} q_max={:.16e} p_min={:.16e} p_max={:.16e} t={:.16e}",
            self.nq, self.np, self.q_min, self.q_max, self.p_min, self.p_max, self.t
        )?;
        for row in self.values.chunks(self.np) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> std::io::Result<Self> {
        let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty snapshot"))??;
        let mut fields = std::collections::HashMap::new();
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let num = |k: &str| -> std::io::Result<f64> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(&format!("missing header field {k}")))
        };
        let nq = num("nq")? as usize;
        let np = num("np")? as usize;
        let mut grid = PhaseGrid::new(
            (num("q_min")?, num("q_max")?),
            (num("p_min")?, num("p_max")?),
            nq,
            np,
        )
        .map_err(|e| bad(&e.to_string()))?;
        grid.t = num("t")?;
        grid.values.clear();
        for line in lines {
            let line = line?;
            for v in line.split(',') {
                grid.values
                    .push(v.trim().parse().map_err(|_| bad("bad value"))?);
            }
        }
        if grid.values.len() != nq * np {
            return Err(bad("value count does not match nq*np"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    Centered,
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpScheme {
    pub advection: Advection,
    pub cfl_safety: f64,
    /// Fixed time step; `None` uses the largest CFL-admissible one.
    pub dt: Option<f64>,
    /// Apply the mixed ∂_q∂_p stencil for D_pq ≠ 0.
    pub cross_diffusion: bool,
}

impl Default for FpScheme {
    fn default() -> Self {
        Self {
            advection: Advection::Centered,
            cfl_safety: CFL_SAFETY,
            dt: None,
            cross_diffusion: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub box_sigmas: f64,
    pub nq: usize,
    pub np: usize,
}

impl GridSpec {
    pub fn square(box_sigmas: f64, n: usize) -> Self {
        Self {
            box_sigmas,
            nq: n,
            np: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpOptions {
    pub scheme: FpScheme,
    /// Longest allowed horizon in units of 1/λ; `None` lifts the cap.
    pub max_horizon_relaxations: Option<f64>,
    pub mass_tolerance: f64,
    /// Keep a copy of the grid at every snapshot time.
    pub keep_snapshots: bool,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            scheme: FpScheme::default(),
            max_horizon_relaxations: Some(5.0),
            mass_tolerance: MASS_TOLERANCE,
            keep_snapshots: true,
        }
    }
}

/// Half-widths (in q and p) of a box holding the state over any horizon:
/// the centroid orbit plus `box_sigmas` times the largest standard deviation
/// of either the rotating initial ellipse or the thermal state.
pub fn box_half_widths(
    params: &ModelParams,
    init: &InitialGaussian,
    box_sigmas: f64,
) -> Result<(f64, f64)> {
    if !(box_sigmas >= MIN_BOX_SIGMAS) {
        return Err(Error::BoxTooSmall(format!(
            "box_sigmas = {box_sigmas} < {MIN_BOX_SIGMAS}"
        )));
    }
    let s0 = initial_covariance(init, params)?;
    let mw = params.m * params.omega;
    // covariance in (q, p/mω); the largest eigenvalue bounds σ_qq under rotation
    let a = s0.sqq;
    let d = s0.spp / (mw * mw);
    let b = s0.spq / mw;
    let top = 0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt();
    let thermal = match asymptotic_covariance(params) {
        Ok(inf) => inf.sqq,
        Err(_) => 0.0,
    };
    let std_max = top.max(thermal).sqrt();
    let orbit = (init.q0.powi(2) + (init.p0 / mw).powi(2)).sqrt();
    let hq = orbit + box_sigmas * std_max;
    Ok((hq, mw * hq))
}

/// Grid filled with the initial correlated coherent state.
pub fn build_grid(
    params: &ModelParams,
    init: &InitialGaussian,
    box_sigmas: f64,
    nq: usize,
    np: usize,
) -> Result<PhaseGrid> {
    let (hq, hp) = box_half_widths(params, init, box_sigmas)?;
    let s0 = initial_covariance(init, params)?;
    Ok(PhaseGrid::new((-hq, hq), (-hp, hp), nq, np)?
        .filled_with(|q, p| wigner_at(&s0, params, q, p)))
}

/// Largest stable explicit time step for this grid.
pub fn cfl_limit(
    grid: &PhaseGrid,
    params: &ModelParams,
    coeffs: &DiffusionCoefficients,
    safety: f64,
) -> f64 {
    let ModelParams {
        m,
        omega,
        lambda,
        mu,
        ..
    } = *params;
    let q_abs = grid.q_min.abs().max(grid.q_max.abs());
    let p_abs = grid.p_min.abs().max(grid.p_max.abs());
    let vq = p_abs / m + (lambda - mu).abs() * q_abs;
    let vp = m * omega * omega * q_abs + (lambda + mu).abs() * p_abs;
    let mut limit = f64::INFINITY;
    if vq > 0.0 {
        limit = limit.min(grid.dq / vq);
    }
    if vp > 0.0 {
        limit = limit.min(grid.dp / vp);
    }
    if coeffs.d_qq > 0.0 {
        limit = limit.min(grid.dq * grid.dq / (2.0 * coeffs.d_qq));
    }
    if coeffs.d_pp > 0.0 {
        limit = limit.min(grid.dp * grid.dp / (2.0 * coeffs.d_pp));
    }
    safety * limit
}

/// ∂W/∂t on every cell, written into `out`.
pub fn fp_rhs_into(
    grid: &PhaseGrid,
    values: &[f64],
    params: &ModelParams,
    coeffs: &DiffusionCoefficients,
    scheme: &FpScheme,
    out: &mut [f64],
) {
    let ModelParams {
        m,
        omega,
        lambda,
        mu,
        ..
    } = *params;
    let (nq, np, dq, dp) = (grid.nq, grid.np, grid.dq, grid.dp);
    let k = m * omega * omega;
    let drift_q = lambda - mu;
    let drift_p = lambda + mu;
    let upwind = scheme.advection == Advection::Upwind;
    let cross = if scheme.cross_diffusion {
        2.0 * coeffs.d_pq / (4.0 * dq * dp)
    } else {
        0.0
    };
    let (dqq, dpp) = (coeffs.d_qq / (dq * dq), coeffs.d_pp / (dp * dp));

    let face_flux = |v: f64, left: f64, right: f64| {
        if upwind {
            v.max(0.0) * left + v.min(0.0) * right
        } else {
            0.5 * v * (left + right)
        }
    };
    let zero_row = vec![0.0; np];

    out.par_chunks_mut(np).enumerate().for_each(|(i, out_row)| {
        let row = &values[i * np..(i + 1) * np];
        let below = if i > 0 {
            &values[(i - 1) * np..i * np]
        } else {
            &zero_row[..]
        };
        let above = if i + 1 < nq {
            &values[(i + 1) * np..(i + 2) * np]
        } else {
            &zero_row[..]
        };
        let q = grid.q(i);
        let q_lo = q - 0.5 * dq;
        let q_hi = q + 0.5 * dq;
        for j in 0..np {
            let p = grid.p(j);
            let w = row[j];
            let w_left = if j > 0 { row[j - 1] } else { 0.0 };
            let w_right = if j + 1 < np { row[j + 1] } else { 0.0 };

            // q-direction faces
            let fq_hi = face_flux(p / m - drift_q * q_hi, w, above[j]);
            let fq_lo = face_flux(p / m - drift_q * q_lo, below[j], w);
            // p-direction faces
            let p_hi = p + 0.5 * dp;
            let p_lo = p - 0.5 * dp;
            let fp_hi = face_flux(-k * q - drift_p * p_hi, w, w_right);
            let fp_lo = face_flux(-k * q - drift_p * p_lo, w_left, w);

            let mut d = -(fq_hi - fq_lo) / dq - (fp_hi - fp_lo) / dp
                + dqq * (above[j] - 2.0 * w + below[j])
                + dpp * (w_right - 2.0 * w + w_left);
            if cross != 0.0 {
                let at = |r: &[f64], jj: isize| {
                    if jj < 0 || jj as usize >= np {
                        0.0
                    } else {
                        r[jj as usize]
                    }
                };
                let jj = j as isize;
                d += cross
                    * (at(above, jj + 1) - at(above, jj - 1) - at(below, jj + 1)
                        + at(below, jj - 1));
            }
            out_row[j] = d;
        }
    });
}

/// ∂W/∂t of the grid's current values with the default (centered) scheme.
pub fn fp_rhs(grid: &PhaseGrid, params: &ModelParams, coeffs: &DiffusionCoefficients) -> PhaseGrid {
    fp_rhs_with(grid, params, coeffs, &FpScheme::default())
}

pub fn fp_rhs_with(
    grid: &PhaseGrid,
    params: &ModelParams,
    coeffs: &DiffusionCoefficients,
    scheme: &FpScheme,
) -> PhaseGrid {
    let mut out = grid.clone();
    fp_rhs_into(grid, &grid.values, params, coeffs, scheme, &mut out.values);
    out
}

/// Mass-normalized discrete moments of the grid.
pub fn extract_moments(grid: &PhaseGrid) -> Result<MomentState> {
    let np = grid.np;
    let sums = |f: &(dyn Fn(f64, f64) -> f64 + Sync)| -> f64 {
        let rows: Vec<f64> = grid
            .values
            .par_chunks(np)
            .enumerate()
            .map(|(i, row)| {
                let q = grid.q(i);
                row.iter()
                    .enumerate()
                    .map(|(j, w)| w * f(q, grid.p(j)))
                    .sum::<f64>()
            })
            .collect();
        rows.iter().sum()
    };
    let mass = sums(&|_, _| 1.0);
    if !(mass > 0.0) {
        return Err(Error::NonPositiveMass(mass * grid.cell_area()));
    }
    let sq = sums(&|q, _| q) / mass;
    let sp = sums(&|_, p| p) / mass;
    Ok(MomentState {
        t: grid.t,
        sq,
        sp,
        sqq: sums(&|q, _| (q - sq).powi(2)) / mass,
        spp: sums(&|_, p| (p - sp).powi(2)) / mass,
        spq: sums(&|q, p| (q - sq) * (p - sp)) / mass,
    })
}

/// Result of a PDE run.
#[derive(Debug, Clone)]
pub struct FpRun {
    /// Grid at every requested snapshot time (and at t_end); only the final
    /// grid unless `keep_snapshots` is set.
    pub snapshots: Vec<PhaseGrid>,
    /// Moments of the initial grid followed by one sample per snapshot.
    pub trajectory: MomentTrajectory,
    pub dt: f64,
    pub steps: usize,
    pub max_mass_drift: f64,
    /// Most negative value relative to the peak, over all snapshots.
    pub min_relative_value: f64,
}

struct Rk4Buffers {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

fn rk4_step(
    grid: &mut PhaseGrid,
    params: &ModelParams,
    coeffs: &DiffusionCoefficients,
    scheme: &FpScheme,
    dt: f64,
    buf: &mut Rk4Buffers,
) {
    let Rk4Buffers { k, stage } = buf;
    let [k1, k2, k3, k4] = k;
    fp_rhs_into(grid, &grid.values, params, coeffs, scheme, k1);
    axpy_into(stage, &grid.values, 0.5 * dt, k1);
    fp_rhs_into(grid, stage, params, coeffs, scheme, k2);
    axpy_into(stage, &grid.values, 0.5 * dt, k2);
    fp_rhs_into(grid, stage, params, coeffs, scheme, k3);
    axpy_into(stage, &grid.values, dt, k3);
    fp_rhs_into(grid, stage, params, coeffs, scheme, k4);
    let h6 = dt / 6.0;
    grid.values
        .par_iter_mut()
        .zip(k1.par_iter())
        .zip(k2.par_iter())
        .zip(k3.par_iter().zip(k4.par_iter()))
        .for_each(|(((w, a), b), (c, d))| *w += h6 * (a + 2.0 * b + 2.0 * c + d));
    grid.t += dt;
}

fn axpy_into(out: &mut [f64], base: &[f64], h: f64, k: &[f64]) {
    out.par_iter_mut()
        .zip(base.par_iter().zip(k.par_iter()))
        .for_each(|(o, (b, d))| *o = b + h * d);
}

/// Integrates the Fokker-Planck equation from the initial Gaussian to
/// `t_end`, snapshotting at each of `snapshot_times` (increasing, ≤ t_end).
pub fn run_fp(
    params: &ModelParams,
    init: &InitialGaussian,
    spec: &GridSpec,
    t_end: f64,
    snapshot_times: &[f64],
    opts: &FpOptions,
) -> Result<FpRun> {
    params.validate().into_result()?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::TimeGrid(format!(
            "t_end must be finite and >= 0, got {t_end}"
        )));
    }
    if let Some(relaxations) = opts.max_horizon_relaxations {
        if params.lambda > 0.0 && t_end > relaxations / params.lambda * (1.0 + 1e-12) {
            return Err(Error::HorizonTooLong {
                t_end,
                cap: relaxations / params.lambda,
                relaxations,
            });
        }
    }
    let mut targets: Vec<f64> = Vec::with_capacity(snapshot_times.len() + 1);
    for &t in snapshot_times {
        if !(t >= 0.0 && t <= t_end) || targets.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::TimeGrid(format!(
                "snapshot times must increase within [0, {t_end}], got {t}"
            )));
        }
        targets.push(t);
    }
    if targets.last() != Some(&t_end) {
        targets.push(t_end);
    }

    let coeffs = gibbs_coefficients(params);
    let mut grid = build_grid(params, init, spec.box_sigmas, spec.nq, spec.np)?;
    let limit = cfl_limit(&grid, params, &coeffs, opts.scheme.cfl_safety);
    let dt_max = match opts.scheme.dt {
        Some(dt) if dt > limit => return Err(Error::CflViolation { dt, limit }),
        Some(dt) => dt,
        None => limit,
    };

    let n = grid.values.len();
    let mut buf = Rk4Buffers {
        k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        stage: vec![0.0; n],
    };
    let mut samples = vec![extract_moments(&grid)?];
    let mut snapshots = Vec::with_capacity(targets.len());
    let mut steps = 0;
    let mut max_mass_drift = (grid.mass() - 1.0).abs();
    if max_mass_drift > opts.mass_tolerance {
        return Err(Error::MassDrift {
            t: 0.0,
            drift: max_mass_drift,
            bound: opts.mass_tolerance,
        });
    }
    let mut min_relative_value = f64::INFINITY;
    let mut dt_used = 0.0_f64;

    for &target in &targets {
        let span = target - grid.t;
        if span > 0.0 {
            let count = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / count as f64;
            dt_used = dt_used.max(dt);
            for _ in 0..count {
                rk4_step(&mut grid, params, &coeffs, &opts.scheme, dt, &mut buf);
            }
            steps += count;
            grid.t = target;
        }
        let drift = (grid.mass() - 1.0).abs();
        max_mass_drift = max_mass_drift.max(drift);
        if drift > opts.mass_tolerance {
            return Err(Error::MassDrift {
                t: target,
                drift,
                bound: opts.mass_tolerance,
            });
        }
        min_relative_value = min_relative_value.min(grid.min_value() / grid.max_value());
        // the first target may be t = 0 itself
        if target > 0.0 || !samples.iter().any(|s| s.t == target) {
            samples.push(extract_moments(&grid)?);
        }
        if opts.keep_snapshots || target == t_end {
            snapshots.push(grid.clone());
        }
    }

    Ok(FpRun {
        snapshots,
        trajectory: MomentTrajectory {
            samples,
            meta: TrajectoryMeta {
                method: format!("fp-rk4-{:?}", opts.scheme.advection).to_lowercase(),
                rtol: 0.0,
                atol: 0.0,
                stats: StepStats {
                    accepted: steps,
                    rejected: 0,
                    rhs_evals: 4 * steps,
                    max_error_estimate: 0.0,
                },
            },
        },
        dt: dt_used,
        steps,
        max_mass_drift,
        min_relative_value,
    })
}
