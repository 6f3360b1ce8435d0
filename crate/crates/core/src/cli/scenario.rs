use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{Engine, RunConfig, SweepParam};
use super::output::{ensure_dir, fmt_float, write_json, CsvWriter};
use super::CliError;
use crate::classicality::{
    classicality_window, decoherence_rate, decoherence_time, delta_cc, delta_qd, thermal_time,
    ClassicalityThresholds, ClassicalityWindow, TimeScaleResult, ZERO_CORRELATION,
};
use crate::fokker_planck::{run_fp, FpOptions, GridSpec};
use crate::model::{
    coth_from_temperature, gibbs_coefficients, initial_covariance, validate, ModelParams,
};
use crate::moments::{
    asymptotic_covariance, default_options, evolve_with, resolve_sign_convention, sigma_closed,
    sigma_pq_resolved, uniform_grid, ClosedFormContext, SignResolution,
};
use crate::states::wigner_at;
use crate::{InitialGaussian, MomentState};

/// Grid sizes (points per axis) of the fp-compare convergence study.
pub const FP_COMPARE_SIZES: [usize; 3] = [128, 256, 512];
/// Grid size at which fp-compare checks the extracted moments.
const FP_COMPARE_MOMENT_SIZE: usize = 256;
const FP_COMPARE_MOMENT_TOL: f64 = 1e-3;
const FP_COMPARE_RATIO: (f64, f64) = (3.5, 4.5);

const SERIES_COLUMNS: [&str; 10] = [
    "t", "sigma_q", "sigma_p", "sigma_qq", "sigma_pp", "sigma_pq", "sigma", "delta_qd", "delta_cc",
    "engine",
];

/// One sample of one engine; `None` marks a quantity the engine does not
/// provide or that is undefined (δ_CC without correlations).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub engine: Engine,
    pub t: f64,
    pub sq: Option<f64>,
    pub sp: Option<f64>,
    pub sqq: Option<f64>,
    pub spp: Option<f64>,
    pub spq: Option<f64>,
    pub sigma: Option<f64>,
    pub delta_qd: Option<f64>,
    pub delta_cc: Option<f64>,
}

impl SeriesRow {
    fn from_state(engine: Engine, s: &MomentState, params: &ModelParams) -> Self {
        Self {
            engine,
            t: s.t,
            sq: Some(s.sq),
            sp: Some(s.sp),
            sqq: Some(s.sqq),
            spp: Some(s.spp),
            spq: Some(s.spq),
            sigma: Some(s.sigma()),
            delta_qd: Some(delta_qd(s, params)),
            delta_cc: delta_cc(s, params).value(),
        }
    }

    fn closed_form(t: f64, sigma: f64, spq: f64, params: &ModelParams) -> Self {
        // σ ≤ σ_qq σ_pp, so √σ is a conservative scale for the zero test
        let root = sigma.sqrt();
        Self {
            engine: Engine::ClosedForm,
            t,
            sq: None,
            sp: None,
            sqq: None,
            spp: None,
            spq: Some(spq),
            sigma: Some(sigma),
            delta_qd: Some(params.hbar / (2.0 * root)),
            delta_cc: (spq.abs() > ZERO_CORRELATION * root).then(|| root / spq.abs()),
        }
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![fmt_float(Some(self.t))];
        out.extend(
            [
                self.sq,
                self.sp,
                self.sqq,
                self.spp,
                self.spq,
                self.sigma,
                self.delta_qd,
                self.delta_cc,
            ]
            .into_iter()
            .map(fmt_float),
        );
        out.push(self.engine.name().to_string());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scales {
    pub decoherence_rate: f64,
    pub t_deco: TimeScaleResult,
    pub t_d: TimeScaleResult,
    /// δ_QD of the stationary state; `None` without relaxation.
    pub delta_qd_inf: Option<f64>,
    pub classicality_windows: Vec<ClassicalityWindow>,
    pub thresholds: ClassicalityThresholds,
    pub sign: SignResolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub times: Vec<f64>,
    pub engines: Vec<Engine>,
    /// Engine-major: all samples of `engines[0]`, then `engines[1]`, ...
    pub series: Vec<SeriesRow>,
    pub scales: Scales,
    pub warnings: Vec<String>,
}

fn rel_dev(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some((a - b).abs() / b.abs()),
        (Some(a), Some(b)) if a == b => Some(0.0),
        _ => None,
    }
}

impl ScenarioResult {
    pub fn rows_of(&self, engine: Engine) -> &[SeriesRow] {
        let n = self.times.len();
        let idx = self
            .engines
            .iter()
            .position(|&e| e == engine)
            .expect("engine not run");
        &self.series[idx * n..(idx + 1) * n]
    }

    /// Per-time deviations between every pair of engines: relative for σ,
    /// σ_qq and σ_pp, and |Δσ_pq|/√σ for the covariance.
    pub fn compare_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (i, &a) in self.engines.iter().enumerate() {
            for &b in &self.engines[i + 1..] {
                for (ra, rb) in self.rows_of(a).iter().zip(self.rows_of(b)) {
                    let d_sigma = rel_dev(ra.sigma, rb.sigma);
                    let d_sqq = rel_dev(ra.sqq, rb.sqq);
                    let d_spp = rel_dev(ra.spp, rb.spp);
                    let d_spq = match (ra.spq, rb.spq, rb.sigma) {
                        (Some(x), Some(y), Some(s)) => Some((x - y).abs() / s.sqrt()),
                        _ => None,
                    };
                    let max = [d_sigma, d_sqq, d_spp, d_spq]
                        .into_iter()
                        .flatten()
                        .reduce(f64::max);
                    let mut row = vec![fmt_float(Some(ra.t)), a.name().into(), b.name().into()];
                    row.extend(
                        [d_sigma, d_sqq, d_spp, d_spq, max]
                            .into_iter()
                            .map(fmt_float),
                    );
                    rows.push(row);
                }
            }
        }
        rows
    }

    pub fn scales_json(&self) -> serde_json::Value {
        let s = &self.scales;
        json!({
            "tool_version": crate::TOOL_VERSION,
            "sigma_pq_sign_convention": s.sign.convention,
            "sigma_pq_sign_residuals": {
                "as_printed": s.sign.residual_as_printed,
                "negated": s.sign.residual_negated,
            },
            "decoherence_rate": s.decoherence_rate,
            "t_deco": s.t_deco.value,
            "t_deco_branch": s.t_deco.formula_branch,
            "t_d": s.t_d.value,
            "t_d_branch": s.t_d.formula_branch,
            "delta_qd_inf": s.delta_qd_inf,
            "classicality_windows": s.classicality_windows,
            "thresholds": s.thresholds,
            "engines": self.engines.iter().map(|e| e.name()).collect::<Vec<_>>(),
            "null_encoding": "\"inf\" for infinite times; null where undefined",
        })
    }

    pub fn summary(&self) -> String {
        let s = &self.scales;
        let time = |v: &TimeScaleResult| {
            v.value
                .finite()
                .map_or("inf".to_string(), |x| format!("{x:.6}"))
        };
        format!(
            "decoherence_rate = {:.6}, t_deco = {}, t_d = {}, {} classicality window(s), sigma_pq sign = {}",
            s.decoherence_rate,
            time(&s.t_deco),
            time(&s.t_d),
            s.classicality_windows.len(),
            s.sign.convention
        )
    }

    fn write(&self, cfg: &RunConfig) -> Result<(), CliError> {
        ensure_dir(&cfg.out_dir)?;
        let conv = Some(self.scales.sign.convention);
        let mut ts = CsvWriter::create(cfg.out_dir.join("timeseries.csv"), conv, &SERIES_COLUMNS)?;
        for row in &self.series {
            ts.row(&row.fields())?;
        }
        ts.finish()?;
        write_json(cfg.out_dir.join("scales.json"), &self.scales_json())?;
        if self.engines.len() >= 2 {
            let mut cmp = CsvWriter::create(
                cfg.out_dir.join("compare.csv"),
                conv,
                &[
                    "t",
                    "engine_a",
                    "engine_b",
                    "rel_dev_sigma",
                    "rel_dev_sigma_qq",
                    "rel_dev_sigma_pp",
                    "scaled_dev_sigma_pq",
                    "max_dev",
                ],
            )?;
            for row in self.compare_rows() {
                cmp.row(&row)?;
            }
            cmp.finish()?;
        }
        Ok(())
    }
}

/// Evaluates every enabled engine on the configured time grid, plus the
/// time scales and classicality windows. Does no I/O.
pub fn compute_scenario(cfg: &RunConfig) -> crate::Result<ScenarioResult> {
    let params = &cfg.params;
    let init = &cfg.init;
    let report = validate(params, Some(init));
    let warnings = report
        .warnings
        .iter()
        .map(|w| format!("{}: {}", w.field, w.message))
        .collect();
    report.into_result()?;

    let sign = resolve_sign_convention(params)?;
    let times = uniform_grid(cfg.t_end, cfg.n_samples);
    let s0 = initial_covariance(init, params)?;
    let mut opts = default_options();
    opts.rtol = cfg.rtol;
    let traj = evolve_with(&s0, params, &gibbs_coefficients(params), &times, &opts)?;
    let windows = classicality_window(&traj, params, &cfg.thresholds)?;

    let mut series = Vec::with_capacity(times.len() * cfg.engines.len());
    for &engine in &cfg.engines {
        match engine {
            Engine::ClosedForm => {
                let ctx = ClosedFormContext::new(params, init)?;
                for &t in &times {
                    let sigma = sigma_closed(t, &ctx, params)?;
                    let spq = sigma_pq_resolved(t, &ctx, params, sign.convention)?;
                    series.push(SeriesRow::closed_form(t, sigma, spq, params));
                }
            }
            Engine::Ode => series.extend(
                traj.samples
                    .iter()
                    .map(|s| SeriesRow::from_state(engine, s, params)),
            ),
            Engine::Fp => {
                let fp_opts = FpOptions {
                    keep_snapshots: false,
                    ..FpOptions::default()
                };
                let run = run_fp(params, init, &cfg.fp, cfg.t_end, &times, &fp_opts)?;
                debug_assert_eq!(run.trajectory.samples.len(), times.len());
                series.extend(
                    run.trajectory
                        .samples
                        .iter()
                        .map(|s| SeriesRow::from_state(engine, s, params)),
                );
            }
        }
    }

    let delta_qd_inf = asymptotic_covariance(params)
        .ok()
        .map(|s| delta_qd(&s, params));
    Ok(ScenarioResult {
        times,
        engines: cfg.engines.clone(),
        series,
        scales: Scales {
            decoherence_rate: decoherence_rate(params, init),
            t_deco: decoherence_time(params, init),
            t_d: thermal_time(params, init),
            delta_qd_inf,
            classicality_windows: windows,
            thresholds: cfg.thresholds,
            sign,
        },
        warnings,
    })
}

/// Computes a scenario and writes timeseries.csv, scales.json and (with two
/// or more engines) compare.csv into the configured output directory.
pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioResult, CliError> {
    let result = compute_scenario(cfg)?;
    result.write(cfg)?;
    Ok(result)
}

/// Model and initial state of one sweep cell. Temperature axes are applied
/// last so that coth(ħω/2kT) sees the swept ω and ħ.
fn cell_inputs(cfg: &RunConfig, values: &[f64]) -> crate::Result<(ModelParams, InitialGaussian)> {
    let mut params = cfg.params;
    let mut init = cfg.init;
    let is_temperature = |p: SweepParam| matches!(p, SweepParam::Kt | SweepParam::CothEps);
    for (axis, &v) in cfg.sweep.iter().zip(values) {
        if !is_temperature(axis.param) {
            axis.param.apply(v, &mut params, &mut init)?;
        }
    }
    let mut temperature_swept = false;
    for (axis, &v) in cfg.sweep.iter().zip(values) {
        if is_temperature(axis.param) {
            axis.param.apply(v, &mut params, &mut init)?;
            temperature_swept = true;
        }
    }
    if let (false, Some(kt)) = (temperature_swept, cfg.kt) {
        params.coth_eps = coth_from_temperature(kt, &params)?;
    }
    Ok((params, init))
}

/// Runs every cell of the configured cartesian grid (in parallel) and writes
/// sweep.csv ordered by axis 1, axis 2, time and engine. A failing cell
/// yields one row whose status column carries the error. Without axes this is
/// [`run_scenario`]. Returns (cells, failed cells).
pub fn sweep(cfg: &RunConfig) -> Result<(usize, usize), CliError> {
    if cfg.sweep.is_empty() {
        run_scenario(cfg)?;
        return Ok((1, 0));
    }
    let mut cells: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &cfg.sweep {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }

    let results: Vec<(Vec<f64>, crate::Result<ScenarioResult>)> = cells
        .into_par_iter()
        .map(|values| {
            let outcome = cell_inputs(cfg, &values).and_then(|(params, init)| {
                let cell = RunConfig {
                    params,
                    init,
                    ..cfg.clone()
                };
                compute_scenario(&cell)
            });
            (values, outcome)
        })
        .collect();

    ensure_dir(&cfg.out_dir)?;
    let convention = results
        .iter()
        .find_map(|(_, r)| r.as_ref().ok().map(|r| r.scales.sign.convention));
    let mut columns: Vec<&str> = cfg.sweep.iter().map(|a| a.param.name()).collect();
    columns.extend_from_slice(&SERIES_COLUMNS[..9]);
    columns.extend_from_slice(&[
        "engine",
        "delta_qd_inf",
        "decoherence_rate",
        "t_deco",
        "t_d",
        "status",
    ]);
    let mut out = CsvWriter::create(cfg.out_dir.join("sweep.csv"), convention, &columns)?;

    let mut failed = 0;
    for (values, outcome) in &results {
        let axes: Vec<String> = values.iter().map(|&v| fmt_float(Some(v))).collect();
        match outcome {
            Ok(res) => {
                let s = &res.scales;
                let status = if res.warnings.is_empty() {
                    "ok".to_string()
                } else {
                    sanitize(&format!("warning: {}", res.warnings.join("; ")))
                };
                let tail = [
                    fmt_float(s.delta_qd_inf),
                    fmt_float(Some(s.decoherence_rate)),
                    fmt_float(s.t_deco.value.finite()),
                    fmt_float(s.t_d.value.finite()),
                    status,
                ];
                let n = res.times.len();
                for k in 0..n {
                    for e in 0..res.engines.len() {
                        let mut row = axes.clone();
                        row.extend(res.series[e * n + k].fields());
                        row.extend(tail.iter().cloned());
                        out.row(&row)?;
                    }
                }
            }
            Err(e) => {
                failed += 1;
                let mut row = axes.clone();
                row.resize(columns.len() - 1, String::new());
                row.push(sanitize(&format!("error: {e}")));
                out.row(&row)?;
            }
        }
    }
    out.finish()?;
    Ok((results.len(), failed))
}

/// Keeps free text inside a single CSV field.
fn sanitize(text: &str) -> String {
    text.replace([',', '\n', '\r'], ";")
}

/// One resolution of the fp-compare study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    /// ∫|W_fp − W_exact| dq dp against the Gaussian built from ODE moments.
    pub l1_error: f64,
    /// L1 error of the previous (coarser) grid divided by this one.
    pub l1_ratio: Option<f64>,
    pub rel_dev_sigma_qq: f64,
    pub rel_dev_sigma_pp: f64,
    /// |Δσ_pq|/√(σ_qq σ_pp).
    pub scaled_dev_sigma_pq: f64,
    pub max_mass_drift: f64,
    pub min_relative_value: f64,
}

impl ConvergenceRow {
    fn moment_dev(&self) -> f64 {
        self.rel_dev_sigma_qq
            .max(self.rel_dev_sigma_pp)
            .max(self.scaled_dev_sigma_pq)
    }
}

impl fmt::Display for ConvergenceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n = {:4}  dt = {:.3e}  L1 = {:.4e}  ratio = {}  moment dev = {:.3e}",
            self.n,
            self.dt,
            self.l1_error,
            self.l1_ratio.map_or("-".to_string(), |r| format!("{r:.3}")),
            self.moment_dev()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpCompareReport {
    pub rows: Vec<ConvergenceRow>,
    pub ode: MomentState,
}

impl FpCompareReport {
    /// Reason for failing the comparison, if any.
    pub fn failure(&self) -> Option<String> {
        let mut reasons = Vec::new();
        for row in &self.rows {
            if row.n == FP_COMPARE_MOMENT_SIZE && !(row.moment_dev() <= FP_COMPARE_MOMENT_TOL) {
                reasons.push(format!(
                    "moment deviation {:.3e} at n = {} exceeds {FP_COMPARE_MOMENT_TOL:e}",
                    row.moment_dev(),
                    row.n
                ));
            }
            if let Some(r) = row.l1_ratio {
                if !(r >= FP_COMPARE_RATIO.0 && r <= FP_COMPARE_RATIO.1) {
                    reasons.push(format!(
                        "L1 ratio {r:.3} at n = {} outside [{}, {}]",
                        row.n, FP_COMPARE_RATIO.0, FP_COMPARE_RATIO.1
                    ));
                }
            }
        }
        (!reasons.is_empty()).then(|| reasons.join("; "))
    }
}

/// Solves the Fokker-Planck equation on each of [`FP_COMPARE_SIZES`] square
/// grids up to `t_end` and compares with the moment ODE. Writes
/// fp_compare.csv; check [`FpCompareReport::failure`] for the verdict.
pub fn fp_compare(cfg: &RunConfig) -> Result<FpCompareReport, CliError> {
    let params = &cfg.params;
    let init = &cfg.init;
    validate(params, Some(init)).into_result()?;
    let sign = resolve_sign_convention(params)?;
    let s0 = initial_covariance(init, params)?;
    let mut opts = default_options();
    opts.rtol = cfg.rtol;
    let ode = *evolve_with(
        &s0,
        params,
        &gibbs_coefficients(params),
        &[0.0, cfg.t_end],
        &opts,
    )?
    .last()
    .expect("two samples");

    let fp_opts = FpOptions {
        keep_snapshots: false,
        ..FpOptions::default()
    };
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for n in FP_COMPARE_SIZES {
        let spec = GridSpec::square(cfg.fp.box_sigmas, n);
        let run = run_fp(params, init, &spec, cfg.t_end, &[cfg.t_end], &fp_opts)?;
        let grid = run.snapshots.last().expect("final snapshot");
        let l1_error = grid.l1_distance_to(|q, p| wigner_at(&ode, params, q, p));
        let fp = run.trajectory.last().expect("final moments");
        rows.push(ConvergenceRow {
            n,
            dt: run.dt,
            steps: run.steps,
            l1_error,
            l1_ratio: rows.last().map(|prev| prev.l1_error / l1_error),
            rel_dev_sigma_qq: (fp.sqq - ode.sqq).abs() / ode.sqq,
            rel_dev_sigma_pp: (fp.spp - ode.spp).abs() / ode.spp,
            scaled_dev_sigma_pq: (fp.spq - ode.spq).abs() / (ode.sqq * ode.spp).sqrt(),
            max_mass_drift: run.max_mass_drift,
            min_relative_value: run.min_relative_value,
        });
    }

    ensure_dir(&cfg.out_dir)?;
    let mut out = CsvWriter::create(
        cfg.out_dir.join("fp_compare.csv"),
        Some(sign.convention),
        &[
            "n",
            "dt",
            "steps",
            "l1_error",
            "l1_ratio",
            "rel_dev_sigma_qq",
            "rel_dev_sigma_pp",
            "scaled_dev_sigma_pq",
            "max_mass_drift",
            "min_relative_value",
        ],
    )?;
    for r in &rows {
        out.row(&[
            r.n.to_string(),
            fmt_float(Some(r.dt)),
            r.steps.to_string(),
            fmt_float(Some(r.l1_error)),
            fmt_float(r.l1_ratio),
            fmt_float(Some(r.rel_dev_sigma_qq)),
            fmt_float(Some(r.rel_dev_sigma_pp)),
            fmt_float(Some(r.scaled_dev_sigma_pq)),
            fmt_float(Some(r.max_mass_drift)),
            fmt_float(Some(r.min_relative_value)),
        ])?;
    }
    out.finish()?;
    Ok(FpCompareReport { rows, ode })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline() -> RunConfig {
        RunConfig::from_toml_str(
            "[model]\nlambda = 0.05\ncoth_eps = 5.0\n[initial]\ndelta = 3.0\nr = 0.5\n[time]\nt_end = 20.0\nn_samples = 41\n",
        )
        .unwrap()
    }

    #[test]
    fn closed_form_and_ode_agree() {
        let res = compute_scenario(&baseline()).unwrap();
        assert_eq!(res.series.len(), 2 * 41);
        for row in res.compare_rows() {
            let max: f64 = row[7].parse().unwrap();
            assert!(max <= 1e-6, "{row:?}");
        }
        assert_eq!(res.scales.delta_qd_inf, Some(0.2));
    }

    #[test]
    fn closed_form_rows_leave_means_empty() {
        let res = compute_scenario(&baseline()).unwrap();
        let f = res.rows_of(Engine::ClosedForm)[3].fields();
        assert!(f[1].is_empty() && f[2].is_empty() && f[3].is_empty() && f[4].is_empty());
        assert!(!f[5].is_empty() && !f[6].is_empty());
        assert_eq!(f[9], "closed_form");
    }

    #[test]
    fn temperature_axis_follows_swept_frequency() {
        let mut cfg = RunConfig::from_toml_str(
            "[model]\nlambda = 0.05\nkT = 1.0\n[time]\nt_end = 1.0\nn_samples = 2\n[sweep]\naxis1 = \"omega\"\nvalues1 = [2.0]\n",
        )
        .unwrap();
        let (params, _) = cell_inputs(&cfg, &[2.0]).unwrap();
        assert!((params.coth_eps - 1.0 / 1.0f64.tanh()).abs() < 1e-14);
        cfg.sweep[0].param = SweepParam::CothEps;
        let (params, _) = cell_inputs(&cfg, &[3.0]).unwrap();
        assert_eq!(params.coth_eps, 3.0);
    }

    #[test]
    fn sanitize_keeps_one_field() {
        assert_eq!(sanitize("a, b\nc"), "a; b;c");
    }
}
