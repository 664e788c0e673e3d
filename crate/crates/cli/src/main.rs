// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vflux_cli::config::{default_config, load_config_for, Target, Task, DEFAULTS_TABLE};
use vflux_cli::golden::{self, Outcome};
use vflux_cli::{emit, run, CliError, Result};

#[derive(Parser)]
#[command(
    name = "vflux",
    version,
    about = "Steady-state heat transport through a V-type three-level system"
)]
#[command(after_help = DEFAULTS_TABLE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Scenario config (TOML, schema "vflux/1"); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; `.json` selects JSON. Defaults to the config's
    /// output.path, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state populations and coherence.
    #[command(after_help = DEFAULTS_TABLE)]
    Steady(Io),
    /// Heat and particle currents, right-lead noise power, conservation residuals.
    #[command(after_help = DEFAULTS_TABLE)]
    Currents(Io),
    /// Counting-statistics cumulants of one lead.
    #[command(after_help = DEFAULTS_TABLE)]
    Cumulants(Io),
    /// Rectification factor over the bias grid.
    #[command(after_help = DEFAULTS_TABLE)]
    Rectify(Io),
    /// Amplification factors over the middle-bath temperature grid.
    #[command(after_help = DEFAULTS_TABLE)]
    Amplify(Io),
    /// Grid over one or two spec fields (needs a config with sweepAxes).
    #[command(after_help = DEFAULTS_TABLE)]
    Sweep(Io),
    /// Reproduce one reference figure's data.
    #[command(after_help = DEFAULTS_TABLE)]
    Reproduce {
        target: Target,
        #[command(flatten)]
        io: Io,
    },
    /// Print the 5x5 generator of the configured spec.
    Generator(Io),
    /// Golden regression corpus.
    Golden {
        #[command(subcommand)]
        action: GoldenAction,
    },
}

#[derive(Subcommand)]
enum GoldenAction {
    /// Compare every case against its digest.
    Check {
        #[arg(long, default_value = "crates/cli/tests/golden/v1/manifest.toml")]
        manifest: PathBuf,
    },
    /// Re-render cases and rewrite their digests (maintainers only).
    Regen {
        #[arg(long, default_value = "crates/cli/tests/golden/v1/manifest.toml")]
        manifest: PathBuf,
        /// Only this case.
        #[arg(long)]
        case: Option<String>,
        /// Confirm maintainer mode (or set VFLUX_MAINTAINER=1).
        #[arg(long)]
        maintainer: bool,
    },
}

fn configured(io: &Io, task: Task, target: Option<Target>) -> Result<vflux_cli::ScenarioConfig> {
    match &io.config {
        Some(p) => load_config_for(p, Some(task), target),
        None => default_config(task, target),
    }
}

fn execute(io: &Io, task: Task, target: Option<Target>) -> Result<()> {
    let config = configured(io, task, target)?;
    let table = run(&config)?;
    let errors = table.error_count();
    if errors > 0 {
        eprintln!(
            "vflux: {errors} of {} rows carry an error",
            table.rows.len()
        );
    }
    emit(&config, &table, io.out.as_deref())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Steady(io) => execute(&io, Task::Steady, None),
        Command::Currents(io) => execute(&io, Task::Currents, None),
        Command::Cumulants(io) => execute(&io, Task::Cumulants, None),
        Command::Rectify(io) => execute(&io, Task::Rectification, None),
        Command::Amplify(io) => execute(&io, Task::Amplification, None),
        Command::Sweep(io) => {
            if io.config.is_none() {
                return Err(CliError::Usage(
                    "sweep needs --config with sweepAxes".into(),
                ));
            }
            execute(&io, Task::Sweep, None)
        }
        Command::Reproduce { target, io } => execute(&io, Task::Reproduce, Some(target)),
        Command::Generator(io) => {
            let config = configured(&io, Task::Steady, None)?;
            let text = vflux_core::build_generator(&config.spec)?.to_text();
            match io.out {
                Some(p) => std::fs::write(&p, text)
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Golden {
            action: GoldenAction::Check { manifest },
        } => {
            let m = golden::load_manifest(&manifest)?;
            let mut failed = 0;
            for case in &m.cases {
                let outcome = golden::check_case(case)?;
                match &outcome {
                    Outcome::Exact => println!("ok      {}", case.name),
                    Outcome::WithinTolerance(d) => {
                        println!("numeric {} ({})", case.name, d.summary())
                    }
                    Outcome::Mismatch { digest, diff } => {
                        failed += 1;
                        let detail = diff
                            .as_ref()
                            .map_or("no stored csv".into(), |d| d.summary());
                        println!("FAIL    {} digest {digest} ({detail})", case.name);
                    }
                }
            }
            if failed > 0 {
                return Err(CliError::Golden(format!("{failed} case(s) failed")));
            }
            Ok(())
        }
        Command::Golden {
            action:
                GoldenAction::Regen {
                    manifest,
                    case,
                    maintainer,
                },
        } => {
            let mut m = golden::load_manifest(&manifest)?;
            let updates = golden::regenerate_golden(
                &mut m,
                case.as_deref(),
                golden::maintainer_mode(maintainer),
            )?;
            for u in updates {
                let diff = u.diff.as_ref().map_or("new csv".into(), |d| d.summary());
                let state = if u.changed() { "changed" } else { "unchanged" };
                println!("{state:9} {} {} ({diff})", u.name, u.new_digest);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vflux: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
