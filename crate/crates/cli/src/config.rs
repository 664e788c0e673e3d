// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration files.
//!
//! A config is a TOML document tagged `schema = "vflux/1"`. Every key is
//! optional except that the task must be known, either from the file or
//! from the subcommand. Spec fields left out are filled from
//! [`defaults_for`].

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use vflux_core::{validate, Bath, CountingKind, SteadyMethod, SystemSpec};

use crate::error::{CliError, Result};

pub const SCHEMA: &str = "vflux/1";
pub const MAX_SWEEP_AXES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Task {
    Steady,
    Currents,
    Cumulants,
    Rectification,
    Amplification,
    Sweep,
    Reproduce,
}

impl Task {
    pub fn tag(self) -> &'static str {
        match self {
            Task::Steady => "steady",
            Task::Currents => "currents",
            Task::Cumulants => "cumulants",
            Task::Rectification => "rectification",
            Task::Amplification => "amplification",
            Task::Sweep => "sweep",
            Task::Reproduce => "reproduce",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, clap::ValueEnum)]
pub enum Target {
    #[serde(rename = "fig2a")]
    #[value(name = "fig2a")]
    Fig2a,
    #[serde(rename = "fig2b")]
    #[value(name = "fig2b")]
    Fig2b,
    #[serde(rename = "fig21a")]
    #[value(name = "fig21a")]
    Fig21a,
    #[serde(rename = "fig21b")]
    #[value(name = "fig21b")]
    Fig21b,
    #[serde(rename = "fig3")]
    #[value(name = "fig3")]
    Fig3,
    #[serde(rename = "fig4b")]
    #[value(name = "fig4b")]
    Fig4b,
    #[serde(rename = "fig5a")]
    #[value(name = "fig5a")]
    Fig5a,
    #[serde(rename = "fig5b")]
    #[value(name = "fig5b")]
    Fig5b,
}

impl Target {
    pub const ALL: [Target; 8] = [
        Target::Fig2a,
        Target::Fig2b,
        Target::Fig21a,
        Target::Fig21b,
        Target::Fig3,
        Target::Fig4b,
        Target::Fig5a,
        Target::Fig5b,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Target::Fig2a => "fig2a",
            Target::Fig2b => "fig2b",
            Target::Fig21a => "fig21a",
            Target::Fig21b => "fig21b",
            Target::Fig3 => "fig3",
            Target::Fig4b => "fig4b",
            Target::Fig5a => "fig5a",
            Target::Fig5b => "fig5b",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepAxis {
    /// `steps` evenly spaced values; both end points are hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CumulantMethodChoice {
    #[default]
    Perturbative,
    FiniteDifference,
    Direct,
}

/// Task knobs; all have defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub steady_method: SteadyMethod,
    pub bath: Bath,
    pub counting_kind: CountingKind,
    pub cumulant_order: usize,
    pub cumulant_method: CumulantMethodChoice,
    pub fd_step: f64,
    /// Mean lead temperature of the rectification task.
    pub t0: f64,
    /// Bias grid; `None` means [`vflux_core::analysis::default_delta_t_grid`].
    pub delta_t: Option<Vec<f64>>,
    /// Middle-bath temperature grid; `None` means
    /// [`vflux_core::analysis::default_tm_grid`].
    pub t_m: Option<Vec<f64>>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            steady_method: SteadyMethod::NullSpace,
            bath: Bath::Right,
            counting_kind: CountingKind::Energy,
            cumulant_order: 2,
            cumulant_method: CumulantMethodChoice::Perturbative,
            fd_step: vflux_core::fcs::DEFAULT_FD_STEP,
            t0: 1.0,
            delta_t: None,
            t_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub spec: SystemSpec,
    pub task: Task,
    pub sweep_axes: Vec<SweepAxis>,
    pub reproduce_target: Option<Target>,
    pub options: Options,
    pub output: Output,
}

// ---- raw file layout ------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawConfig {
    schema: Option<String>,
    task: Option<Task>,
    reproduce_target: Option<Target>,
    #[serde(default)]
    spec: RawSpec,
    #[serde(default)]
    sweep_axes: Vec<RawAxis>,
    #[serde(default)]
    options: RawOptions,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawSpec {
    eps1: Option<f64>,
    eps2: Option<f64>,
    temp_l: Option<f64>,
    temp_m: Option<f64>,
    temp_r: Option<f64>,
    #[serde(rename = "gL11")]
    g_l11: Option<f64>,
    #[serde(rename = "gL22")]
    g_l22: Option<f64>,
    #[serde(rename = "gL12")]
    g_l12: Option<f64>,
    #[serde(rename = "gR11")]
    g_r11: Option<f64>,
    #[serde(rename = "gR22")]
    g_r22: Option<f64>,
    #[serde(rename = "gR12")]
    g_r12: Option<f64>,
    #[serde(rename = "gM")]
    g_m: Option<f64>,
}

impl RawSpec {
    fn apply(&self, spec: &mut SystemSpec) {
        let pairs = [
            (self.eps1, &mut spec.eps1),
            (self.eps2, &mut spec.eps2),
            (self.temp_l, &mut spec.temp_l),
            (self.temp_m, &mut spec.temp_m),
            (self.temp_r, &mut spec.temp_r),
            (self.g_l11, &mut spec.g_l11),
            (self.g_l22, &mut spec.g_l22),
            (self.g_l12, &mut spec.g_l12),
            (self.g_r11, &mut spec.g_r11),
            (self.g_r22, &mut spec.g_r22),
            (self.g_r12, &mut spec.g_r12),
            (self.g_m, &mut spec.g_m),
        ];
        for (value, slot) in pairs {
            if let Some(v) = value {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    name: String,
    min: f64,
    max: f64,
    steps: i64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawOptions {
    steady_method: Option<RawSteadyMethod>,
    bath: Option<RawBath>,
    counting_kind: Option<RawKind>,
    cumulant_order: Option<i64>,
    cumulant_method: Option<CumulantMethodChoice>,
    fd_step: Option<f64>,
    t0: Option<f64>,
    delta_t: Option<Vec<f64>>,
    #[serde(rename = "tM")]
    t_m: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "camelCase")]
enum RawSteadyMethod {
    NullSpace,
    Analytic,
    TimeIntegration,
}

#[derive(Debug, Clone, Copy, Deserialize)]
enum RawBath {
    L,
    R,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "camelCase")]
enum RawKind {
    Energy,
    Particle,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<Format>,
}

// ---- defaults -------------------------------------------------------------

/// Base spec when no reproduce target is named: resonant levels at 1,
/// diagonal couplings 0.01, no interference, no middle bath, `T_L = 2`,
/// `T_M = T_R = 1`.
pub fn base_spec() -> SystemSpec {
    vflux_core::presets::fig2(0.0, 0.0)
}

/// Base spec of each reproduce target, before config overrides.
///
/// Grid coordinates of the target replace the corresponding fields when
/// the target runs.
pub fn defaults_for(target: Option<Target>) -> SystemSpec {
    use vflux_core::presets;
    match target {
        None => base_spec(),
        Some(Target::Fig2a | Target::Fig21a | Target::Fig21b) => presets::fig2(0.0, 0.0),
        Some(Target::Fig2b) => presets::fig2b(1.0, 0.5),
        Some(Target::Fig3) => presets::fig3(0.8, 1.0, 1.0, 1.0),
        Some(Target::Fig4b) => presets::fig4(0.5),
        Some(Target::Fig5a) => presets::fig5(0.0, 0.5),
        Some(Target::Fig5b) => presets::fig5(0.01, 0.5),
    }
}

/// Human-readable defaults table, shown by `--help`.
pub const DEFAULTS_TABLE: &str = "\
Defaults (fields not set in [spec] take these values):
  base          eps1=eps2=1  tempL=2 tempM=1 tempR=1  gL11=gL22=gR11=gR22=0.01
                gL12=gR12=0  gM=0
  fig2a         base; grid gL12 x gR12 over [0, bound]^2, 41 x 41 (steady state)
  fig2b         base with gL12=bound, gR12=0; grid tempR in {0.5, 1.0} x
                dT = 0.05..1.5 step 0.05 (tempL = tempR + dT)
  fig21a/b      base; grid gL12 x gR12 over [0, bound]^2, 41 x 41 (currents;
                fig21b adds a finite-difference SeRR column)
  fig3          base with tempL=tempR=t0=1; grid gL12 x gR12 at bound/50
                resolution, R_J maximized over dT = k*1.9*t0/50, k=1..50
  fig4b         eps1=1.1 eps2=0.9 tempL=2 tempR=0.5 gL11=gR22=gM=0.01, all other
                couplings 0; grid tempM = 0.1..2.0 step 0.05
  fig5a         fig4b with gL22=gR11=gamma; gamma = 0..0.01 step 0.0005,
                beta_R maximized over tempM = 100 points in [0.1, 2]
  fig5b         fig5a at gamma=0.01; grid tempM = 0.1..2.0 step 0.05
Options: steadyMethod=nullSpace bath=R countingKind=energy cumulantOrder=2
  cumulantMethod=perturbative fdStep=1e-4 t0=1 deltaT=k*1.9*t0/50 (k=1..50)
  tM=100 points in [0.1, 2]; output format csv";

// ---- loading --------------------------------------------------------------

/// Reads and validates a config. `task` overrides the file's task.
pub fn load_config(path: &Path, task: Option<Task>) -> Result<ScenarioConfig> {
    load_config_for(path, task, None)
}

/// As [`load_config`], with a reproduce target given on the command line.
/// A file naming a different target is an error.
pub fn load_config_for(
    path: &Path,
    task: Option<Task>,
    target: Option<Target>,
) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    resolve(&text, &path.display().to_string(), task, target)
}

/// Config resolved from defaults only, for subcommands run without a file.
pub fn default_config(task: Task, target: Option<Target>) -> Result<ScenarioConfig> {
    resolve("", "<defaults>", Some(task), target)
}

pub fn parse_config(text: &str, origin: &str, task: Option<Task>) -> Result<ScenarioConfig> {
    resolve(text, origin, task, None)
}

fn resolve(
    text: &str,
    origin: &str,
    task: Option<Task>,
    target: Option<Target>,
) -> Result<ScenarioConfig> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    let mut problems = Vec::new();
    match (raw.reproduce_target, target) {
        (Some(a), Some(b)) if a != b => problems.push(format!(
            "reproduceTarget: config names {a}, command line asks for {b}"
        )),
        (None, Some(b)) => raw.reproduce_target = Some(b),
        _ => {}
    }

    if let Some(schema) = &raw.schema {
        if schema != SCHEMA {
            problems.push(format!(
                "schema: unsupported tag `{schema}`, expected `{SCHEMA}`"
            ));
        }
    }

    let task = match (task, raw.task, raw.reproduce_target) {
        (Some(t), _, _) | (None, Some(t), _) => t,
        (None, None, Some(_)) => Task::Reproduce,
        (None, None, None) => {
            return Err(CliError::Usage(format!(
                "{origin}: no task given; set `task` or `reproduceTarget`"
            )))
        }
    };
    if task == Task::Reproduce && raw.reproduce_target.is_none() {
        problems.push("reproduceTarget: required by the reproduce task".to_string());
    }

    let mut spec = defaults_for(raw.reproduce_target);
    raw.spec.apply(&mut spec);
    for v in validate(&spec) {
        problems.push(format!(
            "spec.{}: violates {} ({})",
            v.field, v.bound, v.detail
        ));
    }

    let mut sweep_axes = Vec::new();
    if raw.sweep_axes.len() > MAX_SWEEP_AXES {
        problems.push(format!(
            "sweepAxes: at most {MAX_SWEEP_AXES} axes, got {}",
            raw.sweep_axes.len()
        ));
    }
    for (i, axis) in raw.sweep_axes.iter().enumerate() {
        if !SystemSpec::FIELD_NAMES.contains(&axis.name.as_str()) {
            problems.push(format!(
                "sweepAxes[{i}].name: unknown field `{}` (expected one of {})",
                axis.name,
                SystemSpec::FIELD_NAMES.join(", ")
            ));
        }
        if axis.steps < 2 {
            problems.push(format!(
                "sweepAxes[{i}].steps: need at least 2, got {}",
                axis.steps
            ));
        }
        if !axis.min.is_finite() || !axis.max.is_finite() {
            problems.push(format!("sweepAxes[{i}]: min and max must be finite"));
        }
        if sweep_axes.iter().any(|a: &SweepAxis| a.name == axis.name) {
            problems.push(format!(
                "sweepAxes[{i}].name: `{}` appears twice",
                axis.name
            ));
        }
        sweep_axes.push(SweepAxis {
            name: axis.name.clone(),
            min: axis.min,
            max: axis.max,
            steps: axis.steps.max(0) as usize,
        });
    }

    let options = resolve_options(&raw.options, &mut problems);

    if !problems.is_empty() {
        return Err(CliError::Invalid {
            origin: origin.to_string(),
            problems,
        });
    }
    Ok(ScenarioConfig {
        spec,
        task,
        sweep_axes,
        reproduce_target: raw.reproduce_target,
        options,
        output: Output {
            path: raw.output.path,
            format: raw.output.format.unwrap_or_default(),
        },
    })
}

fn resolve_options(raw: &RawOptions, problems: &mut Vec<String>) -> Options {
    let mut o = Options::default();
    if let Some(m) = raw.steady_method {
        o.steady_method = match m {
            RawSteadyMethod::NullSpace => SteadyMethod::NullSpace,
            RawSteadyMethod::Analytic => SteadyMethod::Analytic,
            RawSteadyMethod::TimeIntegration => SteadyMethod::TimeIntegration,
        };
    }
    if let Some(b) = raw.bath {
        o.bath = match b {
            RawBath::L => Bath::Left,
            RawBath::R => Bath::Right,
        };
    }
    if let Some(k) = raw.counting_kind {
        o.counting_kind = match k {
            RawKind::Energy => CountingKind::Energy,
            RawKind::Particle => CountingKind::Particle,
        };
    }
    if let Some(m) = raw.cumulant_method {
        o.cumulant_method = m;
    }
    let max_order = match o.cumulant_method {
        CumulantMethodChoice::Perturbative => 4,
        CumulantMethodChoice::FiniteDifference => 2,
        CumulantMethodChoice::Direct => 1,
    };
    if let Some(n) = raw.cumulant_order {
        if n < 1 || n > max_order {
            problems.push(format!(
                "options.cumulantOrder: must be in 1..={max_order}, got {n}"
            ));
        } else {
            o.cumulant_order = n as usize;
        }
    }
    o.cumulant_order = o.cumulant_order.min(max_order as usize);
    if let Some(h) = raw.fd_step {
        let (lo, hi) = vflux_core::fcs::FD_STEP_RANGE;
        if !(h >= lo && h <= hi) {
            problems.push(format!("options.fdStep: {h} outside [{lo:e}, {hi:e}]"));
        }
        o.fd_step = h;
    }
    if let Some(t0) = raw.t0 {
        if !(t0 > 0.0) {
            problems.push(format!("options.t0: must be positive, got {t0}"));
        }
        o.t0 = t0;
    }
    if let Some(grid) = &raw.delta_t {
        if grid.is_empty() {
            problems.push("options.deltaT: empty grid".to_string());
        }
        o.delta_t = Some(grid.clone());
    }
    if let Some(grid) = &raw.t_m {
        if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0)) {
            problems.push("options.tM: needs a non-empty grid of positive temperatures".into());
        }
        o.t_m = Some(grid.clone());
    }
    o
}
