// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Task execution.
//!
//! Every task produces a [`Table`]. Grid points are evaluated on a worker
//! pool and collected in grid order, so the output does not depend on the
//! number of threads. A physics error at one point fills that row's
//! `error` column and leaves its numeric columns empty.

use std::path::Path;

use rayon::prelude::*;
use vflux_core::analysis::{
    amplification, default_delta_t_grid, default_tm_grid, max_amplification, max_rectification,
    rectification,
};
use vflux_core::fcs::{cumulants_finite_difference, cumulants_perturbative, first_cumulant_direct};
use vflux_core::transport::{
    heat_currents_from_state, particle_currents_from_state, CONSERVATION_TOL,
};
use vflux_core::{
    solve_steady, validate, Bath, CountingKind, Error as PhysicsError, SteadyMethod, SystemSpec,
};

use crate::config::{CumulantMethodChoice, Format, ScenarioConfig, SweepAxis, Target, Task};
use crate::error::{CliError, Result};
use crate::table::{Cell, Table};

pub const THREADS_ENV: &str = "VFLUX_THREADS";

/// Worker count from `VFLUX_THREADS`; `None` lets the pool pick.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{s}`"
            ))),
        },
    }
}

/// Evaluates `f` on every item in parallel; results keep the item order.
fn par_rows<T, F>(threads: Option<usize>, items: &[T], f: F) -> Result<Vec<Vec<Cell>>>
where
    T: Sync,
    F: Fn(&T) -> Vec<Cell> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

// ---- row layouts ------------------------------------------------------------

fn param_columns() -> Vec<String> {
    SystemSpec::FIELD_NAMES
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn param_cells(spec: &SystemSpec) -> Vec<Cell> {
    spec.values().iter().map(|&v| Cell::Num(v)).collect()
}

fn with_params(extra: &[&str]) -> Vec<String> {
    let mut c = param_columns();
    c.extend(extra.iter().map(|s| s.to_string()));
    c
}

/// Completes a row that holds its leading cells: either the computed cells
/// plus an empty error, or blanks up to `width` plus the error text.
fn finish(mut row: Vec<Cell>, width: usize, body: Result<Vec<Cell>, PhysicsError>) -> Vec<Cell> {
    match body {
        Ok(cells) => {
            row.extend(cells);
            row.push(Cell::Text(String::new()));
        }
        Err(e) => {
            row.resize(width - 1, Cell::Missing);
            row.push(Cell::Text(e.to_string()));
        }
    }
    debug_assert_eq!(row.len(), width);
    row
}

fn check(spec: &SystemSpec) -> Result<(), PhysicsError> {
    let v = validate(spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(PhysicsError::InvalidSpec(v))
    }
}

const STEADY_COLUMNS: [&str; 9] = [
    "rho11",
    "rho22",
    "rhogg",
    "rho12Re",
    "rho12Im",
    "rho12Abs",
    "steadyResidual",
    "positivityWarning",
    "error",
];

pub fn steady_columns() -> Vec<String> {
    let mut c = with_params(&["steadyMethod"]);
    c.extend(STEADY_COLUMNS.iter().map(|s| s.to_string()));
    c
}

fn steady_cells(
    spec: &SystemSpec,
    method: SteadyMethod,
) -> Result<(Vec<Cell>, vflux_core::SteadyState), PhysicsError> {
    check(spec)?;
    let ss = solve_steady(spec, method)?;
    let s = &ss.state;
    let cells = vec![
        Cell::Num(s.rho11().re),
        Cell::Num(s.rho22().re),
        Cell::Num(s.rhogg().re),
        Cell::Num(s.rho12().re),
        Cell::Num(s.rho12().im),
        Cell::Num(s.rho12().norm()),
        Cell::Num(ss.residual),
        Cell::Flag(ss.positivity_warning),
    ];
    Ok((cells, ss))
}

pub fn steady_row(spec: &SystemSpec, method: SteadyMethod) -> Vec<Cell> {
    let mut row = param_cells(spec);
    row.push(Cell::Text(method.tag().to_string()));
    finish(
        row,
        steady_columns().len(),
        steady_cells(spec, method).map(|(c, _)| c),
    )
}

const POINT_EXTRA: [&str; 11] = [
    "JeL",
    "JeR",
    "JeM",
    "JpL",
    "JpR",
    "JpM",
    "SeRR",
    "energyResidual",
    "particleResidual",
    "conservationWarning",
    "error",
];

/// Columns of a full grid point: parameters, steady state, currents,
/// right-lead energy noise and conservation diagnostics.
pub fn point_columns() -> Vec<String> {
    let mut c = steady_columns();
    c.pop();
    c.extend(POINT_EXTRA.iter().map(|s| s.to_string()));
    c
}

pub fn point_row(spec: &SystemSpec, method: SteadyMethod) -> Vec<Cell> {
    point_row_with(spec, method, false)
}

/// [`point_columns`] plus the finite-difference value of `SeRR`.
pub fn noise_columns() -> Vec<String> {
    let mut c = point_columns();
    c.insert(c.len() - 1, "SeRRFiniteDifference".to_string());
    c
}

fn point_row_with(spec: &SystemSpec, method: SteadyMethod, fd_noise: bool) -> Vec<Cell> {
    let width = if fd_noise {
        noise_columns().len()
    } else {
        point_columns().len()
    };
    let body = || -> Result<Vec<Cell>, PhysicsError> {
        let (mut cells, ss) = steady_cells(spec, method)?;
        let e = heat_currents_from_state(spec, &ss.state)?;
        let p = particle_currents_from_state(spec, &ss.state)?;
        let noise = cumulants_perturbative(spec, Bath::Right, CountingKind::Energy, 2)?.values[1];
        let er = (e.left + e.right + e.middle).abs();
        let pr = (p.left + p.right).abs();
        cells.extend([
            Cell::Num(e.left),
            Cell::Num(e.right),
            Cell::Num(e.middle),
            Cell::Num(p.left),
            Cell::Num(p.right),
            Cell::Num(p.middle),
            Cell::Num(noise),
            Cell::Num(er),
            Cell::Num(pr),
            Cell::Flag(er > CONSERVATION_TOL || pr > CONSERVATION_TOL),
        ]);
        if fd_noise {
            let fd = cumulants_finite_difference(
                spec,
                Bath::Right,
                CountingKind::Energy,
                2,
                vflux_core::fcs::DEFAULT_FD_STEP,
            )?;
            cells.push(Cell::Num(fd.values[1]));
        }
        Ok(cells)
    };
    let mut row = param_cells(spec);
    row.push(Cell::Text(method.tag().to_string()));
    finish(row, width, body())
}

pub fn cumulant_columns() -> Vec<String> {
    with_params(&[
        "bath",
        "kind",
        "method",
        "E1",
        "E2",
        "E3",
        "E4",
        "imagResidue",
        "imagWarning",
        "error",
    ])
}

fn cumulant_row(spec: &SystemSpec, config: &ScenarioConfig) -> Vec<Cell> {
    let o = &config.options;
    let mut row = param_cells(spec);
    let method = match o.cumulant_method {
        CumulantMethodChoice::Perturbative => "perturbative",
        CumulantMethodChoice::FiniteDifference => "finite_difference",
        CumulantMethodChoice::Direct => "direct",
    };
    row.extend([
        Cell::Text(o.bath.tag().to_string()),
        Cell::Text(o.counting_kind.tag().to_string()),
        Cell::Text(method.to_string()),
    ]);
    let body = || -> Result<Vec<Cell>, PhysicsError> {
        check(spec)?;
        let (values, residue) = match o.cumulant_method {
            CumulantMethodChoice::Perturbative => {
                let c = cumulants_perturbative(spec, o.bath, o.counting_kind, o.cumulant_order)?;
                (c.values.clone(), Some(c.imag_residue))
            }
            CumulantMethodChoice::FiniteDifference => {
                let c = cumulants_finite_difference(
                    spec,
                    o.bath,
                    o.counting_kind,
                    o.cumulant_order,
                    o.fd_step,
                )?;
                (c.values.clone(), Some(c.imag_residue))
            }
            CumulantMethodChoice::Direct => (
                vec![first_cumulant_direct(spec, o.bath, o.counting_kind)?],
                None,
            ),
        };
        let mut cells: Vec<Cell> = (0..4).map(|k| Cell::num(values.get(k).copied())).collect();
        cells.push(Cell::num(residue));
        cells.push(residue.map_or(Cell::Missing, |r| {
            Cell::Flag(r > vflux_core::fcs::IMAG_WARNING)
        }));
        Ok(cells)
    };
    finish(row, cumulant_columns().len(), body())
}

pub fn rectification_columns() -> Vec<String> {
    with_params(&["t0", "deltaT", "jForward", "jBackward", "rj", "error"])
}

fn rectification_row(spec: &SystemSpec, t0: f64, dt: f64) -> Vec<Cell> {
    let mut row = param_cells(spec);
    row.extend([Cell::Num(t0), Cell::Num(dt)]);
    let body = check(spec)
        .and_then(|_| rectification(spec, t0, dt))
        .map(|r| {
            vec![
                Cell::Num(r.j_forward),
                Cell::Num(r.j_backward),
                Cell::Num(r.rj),
            ]
        });
    finish(row, rectification_columns().len(), body)
}

pub fn amplification_columns() -> Vec<String> {
    with_params(&[
        "betaL",
        "betaR",
        "dJeLdTM",
        "dJeRdTM",
        "dJeMdTM",
        "theta",
        "branchResidual",
        "stencilH",
        "error",
    ])
}

fn amplification_row(spec: &SystemSpec, t_m: f64) -> Vec<Cell> {
    let at = SystemSpec {
        temp_m: t_m,
        ..*spec
    };
    let body = check(&at)
        .and_then(|_| amplification(spec, t_m, None))
        .map(|a| {
            vec![
                Cell::Num(a.beta_l),
                Cell::Num(a.beta_r),
                Cell::Num(a.dj_dtm.left),
                Cell::Num(a.dj_dtm.right),
                Cell::Num(a.dj_dtm.middle),
                Cell::Int(a.theta.into()),
                Cell::Num(a.branch_residual),
                Cell::Num(a.stencil_h),
            ]
        });
    finish(param_cells(&at), amplification_columns().len(), body)
}

pub fn fig3_columns() -> Vec<String> {
    with_params(&["t0", "rjMax", "deltaTStar", "error"])
}

fn fig3_row(spec: &SystemSpec, t0: f64, grid: &[f64]) -> Vec<Cell> {
    let at = SystemSpec {
        temp_l: t0,
        temp_r: t0,
        ..*spec
    };
    let mut row = param_cells(&at);
    row.push(Cell::Num(t0));
    let body = check(&at)
        .and_then(|_| max_rectification(spec, t0, grid))
        .map(|m| vec![Cell::Num(m.rj_max), Cell::Num(m.delta_t_star)]);
    finish(row, fig3_columns().len(), body)
}

pub fn fig5a_columns() -> Vec<String> {
    with_params(&["gamma", "betaRMax", "tMStar", "error"])
}

fn fig5a_row(spec: &SystemSpec, gamma: f64, grid: &[f64]) -> Vec<Cell> {
    let base = SystemSpec {
        g_l22: gamma,
        g_r11: gamma,
        ..*spec
    };
    let result = check(&base).and_then(|_| max_amplification(&base, grid));
    let at = match &result {
        Ok(m) => SystemSpec {
            temp_m: m.t_m_star,
            ..base
        },
        Err(_) => base,
    };
    let mut row = param_cells(&at);
    row.push(Cell::Num(gamma));
    let body = result.map(|m| vec![Cell::Num(m.beta_r_max), Cell::Num(m.t_m_star)]);
    finish(row, fig5a_columns().len(), body)
}

// ---- grids ----------------------------------------------------------------

/// `n + 1` fractions `k/n`, `k = 0..=n`.
pub fn fractions(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

/// Specs of the `(γL12, γR12)` grid at resolution `bound/n`, left axis outer.
pub fn coupling_grid(spec: &SystemSpec, n: usize) -> Vec<SystemSpec> {
    let (bl, br) = (
        spec.interference_bound(Bath::Left),
        spec.interference_bound(Bath::Right),
    );
    let f = fractions(n);
    let mut out = Vec::with_capacity(f.len() * f.len());
    for &a in &f {
        for &b in &f {
            out.push(SystemSpec {
                g_l12: a * bl,
                g_r12: b * br,
                ..*spec
            });
        }
    }
    out
}

/// `T_M = 0.1, 0.15, …, 2.0`.
pub fn tm_steps() -> Vec<f64> {
    (2..=40).map(|k| k as f64 / 20.0).collect()
}

/// `ΔT = 0.05, 0.10, …, 1.5`.
pub fn bias_steps() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 20.0).collect()
}

/// `γ = 0, 0.0005, …, 0.01`.
pub fn gamma_steps() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 2000.0).collect()
}

pub const FIG2_RESOLUTION: usize = 40;
pub const FIG3_RESOLUTION: usize = 50;
pub const FIG2B_COLD: [f64; 2] = [0.5, 1.0];

fn sweep_specs(spec: &SystemSpec, axes: &[SweepAxis]) -> Result<Vec<SystemSpec>> {
    let mut specs = vec![*spec];
    for axis in axes {
        let values = axis.values();
        let mut next = Vec::with_capacity(specs.len() * values.len());
        for s in &specs {
            for &v in &values {
                let mut t = *s;
                t.set_field(&axis.name, v)?;
                next.push(t);
            }
        }
        specs = next;
    }
    Ok(specs)
}

// ---- entry points -----------------------------------------------------------

/// Runs `config` with the worker count taken from `VFLUX_THREADS`.
pub fn run(config: &ScenarioConfig) -> Result<Table> {
    run_with_threads(config, threads_from_env()?)
}

pub fn run_with_threads(config: &ScenarioConfig, threads: Option<usize>) -> Result<Table> {
    let spec = &config.spec;
    let o = &config.options;
    match config.task {
        Task::Steady => Ok(Table {
            columns: steady_columns(),
            rows: vec![steady_row(spec, o.steady_method)],
        }),
        Task::Currents => Ok(Table {
            columns: point_columns(),
            rows: vec![point_row(spec, o.steady_method)],
        }),
        Task::Cumulants => Ok(Table {
            columns: cumulant_columns(),
            rows: vec![cumulant_row(spec, config)],
        }),
        Task::Rectification => {
            let grid = o
                .delta_t
                .clone()
                .unwrap_or_else(|| default_delta_t_grid(o.t0));
            let rows = par_rows(threads, &grid, |&dt| rectification_row(spec, o.t0, dt))?;
            Ok(Table {
                columns: rectification_columns(),
                rows,
            })
        }
        Task::Amplification => {
            let grid = o.t_m.clone().unwrap_or_else(default_tm_grid);
            let rows = par_rows(threads, &grid, |&t| amplification_row(spec, t))?;
            Ok(Table {
                columns: amplification_columns(),
                rows,
            })
        }
        Task::Sweep => sweep(config, threads),
        Task::Reproduce => {
            let target = config.reproduce_target.ok_or_else(|| {
                CliError::Usage("the reproduce task needs reproduceTarget".into())
            })?;
            reproduce(target, config, threads)
        }
    }
}

/// Cartesian grid over the config's axes, row-major in axis order.
pub fn sweep(config: &ScenarioConfig, threads: Option<usize>) -> Result<Table> {
    if config.sweep_axes.is_empty() {
        return Err(CliError::Usage(
            "sweep needs 1 or 2 sweepAxes, got 0".into(),
        ));
    }
    let specs = sweep_specs(&config.spec, &config.sweep_axes)?;
    let method = config.options.steady_method;
    let rows = par_rows(threads, &specs, |s| point_row(s, method))?;
    Ok(Table {
        columns: point_columns(),
        rows,
    })
}

pub fn reproduce(target: Target, config: &ScenarioConfig, threads: Option<usize>) -> Result<Table> {
    let spec = &config.spec;
    let o = &config.options;
    let method = o.steady_method;
    let points = |specs: Vec<SystemSpec>| -> Result<Table> {
        let rows = par_rows(threads, &specs, |s| point_row(s, method))?;
        Ok(Table {
            columns: point_columns(),
            rows,
        })
    };
    match target {
        Target::Fig2a => {
            let specs = coupling_grid(spec, FIG2_RESOLUTION);
            let rows = par_rows(threads, &specs, |s| steady_row(s, method))?;
            Ok(Table {
                columns: steady_columns(),
                rows,
            })
        }
        Target::Fig21a => points(coupling_grid(spec, FIG2_RESOLUTION)),
        Target::Fig21b => {
            let specs = coupling_grid(spec, FIG2_RESOLUTION);
            let rows = par_rows(threads, &specs, |s| point_row_with(s, method, true))?;
            Ok(Table {
                columns: noise_columns(),
                rows,
            })
        }
        Target::Fig2b => {
            let mut specs = Vec::new();
            for cold in FIG2B_COLD {
                for dt in bias_steps() {
                    specs.push(SystemSpec {
                        temp_l: cold + dt,
                        temp_r: cold,
                        ..*spec
                    });
                }
            }
            points(specs)
        }
        Target::Fig3 => {
            let grid = o
                .delta_t
                .clone()
                .unwrap_or_else(|| default_delta_t_grid(o.t0));
            let specs = coupling_grid(spec, FIG3_RESOLUTION);
            let rows = par_rows(threads, &specs, |s| fig3_row(s, o.t0, &grid))?;
            Ok(Table {
                columns: fig3_columns(),
                rows,
            })
        }
        Target::Fig4b | Target::Fig5b => {
            let grid = tm_steps();
            points(
                grid.iter()
                    .map(|&t| SystemSpec { temp_m: t, ..*spec })
                    .collect(),
            )
        }
        Target::Fig5a => {
            let grid = o.t_m.clone().unwrap_or_else(default_tm_grid);
            let rows = par_rows(threads, &gamma_steps(), |&g| fig5a_row(spec, g, &grid))?;
            Ok(Table {
                columns: fig5a_columns(),
                rows,
            })
        }
    }
}

/// Writes `table` to `out` (falling back to the config's output path, then
/// stdout). The format is the config's, or `json` for a `.json` path.
pub fn emit(config: &ScenarioConfig, table: &Table, out: Option<&Path>) -> Result<()> {
    let path = out.or(config.output.path.as_deref());
    let format = match path {
        Some(p) if out.is_some() && p.extension().is_some_and(|e| e == "json") => Format::Json,
        _ => config.output.format,
    };
    let bytes = table.encode(format);
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
