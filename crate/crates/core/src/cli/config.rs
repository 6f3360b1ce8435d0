//! Run configuration: a TOML file with flat `[model]`, `[initial]`, `[time]`,
//! `[thresholds]`, `[engines]`, `[fp]`, `[output]` and `[sweep]` sections.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;
use crate::classicality::ClassicalityThresholds;
use crate::fokker_planck::GridSpec;
use crate::model::{coth_from_temperature, InitialGaussian, ModelParams};

/// Upper bound on the number of sweep cells.
pub const MAX_SWEEP_CELLS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    ClosedForm,
    Ode,
    Fp,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::ClosedForm => "closed_form",
            Engine::Ode => "ode",
            Engine::Fp => "fp",
        }
    }
}

/// Parameters a sweep axis may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    M,
    Omega,
    Hbar,
    Lambda,
    Mu,
    CothEps,
    Kt,
    Delta,
    R,
    Q0,
    P0,
}

impl SweepParam {
    const ALL: [(&'static str, SweepParam); 11] = [
        ("m", SweepParam::M),
        ("omega", SweepParam::Omega),
        ("hbar", SweepParam::Hbar),
        ("lambda", SweepParam::Lambda),
        ("mu", SweepParam::Mu),
        ("coth_eps", SweepParam::CothEps),
        ("kT", SweepParam::Kt),
        ("delta", SweepParam::Delta),
        ("r", SweepParam::R),
        ("q0", SweepParam::Q0),
        ("p0", SweepParam::P0),
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == name).map(|(_, p)| *p)
    }

    pub fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, p)| *p == self)
            .map(|(n, _)| *n)
            .unwrap()
    }

    /// Applies `value` to a copy of the model/initial state.
    pub fn apply(
        self,
        value: f64,
        params: &mut ModelParams,
        init: &mut InitialGaussian,
    ) -> crate::Result<()> {
        match self {
            SweepParam::M => params.m = value,
            SweepParam::Omega => params.omega = value,
            SweepParam::Hbar => params.hbar = value,
            SweepParam::Lambda => params.lambda = value,
            SweepParam::Mu => params.mu = value,
            SweepParam::CothEps => params.coth_eps = value,
            SweepParam::Kt => params.coth_eps = coth_from_temperature(value, params)?,
            SweepParam::Delta => init.delta = value,
            SweepParam::R => init.r = value,
            SweepParam::Q0 => init.q0 = value,
            SweepParam::P0 => init.p0 = value,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    /// Set when the model section gave kT; sweeps over ω or ħ recompute coth.
    pub kt: Option<f64>,
    pub init: InitialGaussian,
    pub t_end: f64,
    pub n_samples: usize,
    pub thresholds: ClassicalityThresholds,
    /// Enabled engines in canonical order.
    pub engines: Vec<Engine>,
    pub fp: GridSpec,
    pub out_dir: PathBuf,
    pub sweep: Vec<SweepAxis>,
    /// ODE relative tolerance.
    pub rtol: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    #[serde(default)]
    initial: RawInitial,
    time: RawTime,
    #[serde(default)]
    thresholds: RawThresholds,
    #[serde(default)]
    engines: RawEngines,
    #[serde(default)]
    fp: RawFp,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    m: Option<f64>,
    omega: Option<f64>,
    hbar: Option<f64>,
    lambda: f64,
    #[serde(default)]
    mu: f64,
    #[serde(rename = "kT")]
    kt: Option<f64>,
    coth_eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawInitial {
    delta: f64,
    r: f64,
    q0: f64,
    p0: f64,
}

impl Default for RawInitial {
    fn default() -> Self {
        Self {
            delta: 1.0,
            r: 0.0,
            q0: 0.0,
            p0: 0.0,
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_end: f64,
    n_samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawThresholds {
    qd_max: f64,
    cc_max: f64,
}

impl Default for RawThresholds {
    fn default() -> Self {
        let d = ClassicalityThresholds::default();
        Self {
            qd_max: d.qd_max,
            cc_max: d.cc_max,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEngines {
    closed_form: bool,
    ode: bool,
    fp: bool,
}

impl Default for RawEngines {
    fn default() -> Self {
        Self {
            closed_form: true,
            ode: true,
            fp: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawFp {
    box_sigmas: f64,
    nq: usize,
    np: usize,
}

impl Default for RawFp {
    fn default() -> Self {
        Self {
            box_sigmas: 8.0,
            nq: 256,
            np: 256,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: PathBuf,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    axis1: Option<String>,
    values1: Vec<f64>,
    axis2: Option<String>,
    values2: Vec<f64>,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        // toml errors carry line/column and the offending key
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;

        let m = &raw.model;
        let mut params = ModelParams {
            m: m.m.unwrap_or(1.0),
            omega: m.omega.unwrap_or(1.0),
            hbar: m.hbar.unwrap_or(1.0),
            lambda: m.lambda,
            mu: m.mu,
            coth_eps: 1.0,
        };
        let kt = match (m.kt, m.coth_eps) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "model",
                    "give exactly one of kT and coth_eps, not both",
                ))
            }
            (None, None) => return Err(config_err("model", "one of kT or coth_eps is required")),
            (Some(kt), None) => {
                params.coth_eps =
                    coth_from_temperature(kt, &params).map_err(|e| config_err("model.kT", e))?;
                Some(kt)
            }
            (None, Some(c)) => {
                params.coth_eps = c;
                None
            }
        };
        let init = InitialGaussian {
            delta: raw.initial.delta,
            r: raw.initial.r,
            q0: raw.initial.q0,
            p0: raw.initial.p0,
        };
        let report = crate::model::validate(&params, Some(&init));
        if let Some(issue) = report.errors.first() {
            let section = if ["delta", "r", "q0/p0"].contains(&issue.field) {
                "initial"
            } else {
                "model"
            };
            return Err(config_err(
                &format!("{section}.{}", issue.field),
                &issue.message,
            ));
        }

        if !(raw.time.t_end > 0.0) || !raw.time.t_end.is_finite() {
            return Err(config_err(
                "time.t_end",
                format!("must be positive, got {}", raw.time.t_end),
            ));
        }
        if raw.time.n_samples < 2 {
            return Err(config_err("time.n_samples", "need at least 2 samples"));
        }
        let thresholds = ClassicalityThresholds::new(raw.thresholds.qd_max, raw.thresholds.cc_max)
            .map_err(|e| config_err("thresholds", e))?;

        let mut engines = Vec::new();
        if raw.engines.closed_form {
            engines.push(Engine::ClosedForm);
        }
        if raw.engines.ode {
            engines.push(Engine::Ode);
        }
        if raw.engines.fp {
            engines.push(Engine::Fp);
        }
        if engines.is_empty() {
            return Err(config_err("engines", "enable at least one engine"));
        }

        let sweep = parse_sweep(&raw.sweep)?;

        Ok(Self {
            params,
            kt,
            init,
            t_end: raw.time.t_end,
            n_samples: raw.time.n_samples,
            thresholds,
            engines,
            fp: GridSpec {
                box_sigmas: raw.fp.box_sigmas,
                nq: raw.fp.nq,
                np: raw.fp.np,
            },
            out_dir: raw.output.dir,
            sweep,
            rtol: crate::moments::default_options().rtol,
        })
    }

    pub fn has(&self, engine: Engine) -> bool {
        self.engines.contains(&engine)
    }
}

fn parse_sweep(raw: &RawSweep) -> Result<Vec<SweepAxis>, CliError> {
    let mut axes = Vec::new();
    for (idx, name, values) in [(1, &raw.axis1, &raw.values1), (2, &raw.axis2, &raw.values2)] {
        match name {
            None if values.is_empty() => {}
            None => {
                return Err(config_err(
                    &format!("sweep.values{idx}"),
                    format!("given without sweep.axis{idx}"),
                ))
            }
            Some(name) => {
                let param = SweepParam::parse(name).ok_or_else(|| {
                    config_err(
                        &format!("sweep.axis{idx}"),
                        format!("unknown parameter `{name}`"),
                    )
                })?;
                if values.is_empty() {
                    return Err(config_err(
                        &format!("sweep.values{idx}"),
                        "must not be empty",
                    ));
                }
                axes.push(SweepAxis {
                    param,
                    values: values.clone(),
                });
            }
        }
    }
    if axes.len() == 2 && axes[0].param == axes[1].param {
        return Err(config_err("sweep.axis2", "must differ from sweep.axis1"));
    }
    if raw.axis2.is_some() && raw.axis1.is_none() {
        return Err(config_err(
            "sweep.axis1",
            "required when sweep.axis2 is set",
        ));
    }
    let cells: usize = axes.iter().map(|a| a.values.len()).product();
    if cells > MAX_SWEEP_CELLS {
        return Err(config_err(
            "sweep",
            format!("{cells} cells exceed the limit of {MAX_SWEEP_CELLS}"),
        ));
    }
    Ok(axes)
}
