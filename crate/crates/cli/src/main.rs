//! `savbn`: equilibria, dynamics, tolls and welfare for the NV/SAV
//! bottleneck model, driven by a flat TOML scenario file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sav_bottleneck::params::DEFAULT_TOL;
use sav_bottleneck::validate_with_tol;

use crate::commands::Ctx;
use crate::error::CliError;
use crate::output::Output;

#[derive(Parser)]
#[command(
    name = "savbn",
    version,
    about = "Bottleneck model with normal and shared autonomous vehicles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file, or a bundled preset: fig2, fig3, fig4, fig6.
    #[arg(long, global = true, default_value = "fig2")]
    config: String,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Validation tolerance; for `verify`, replaces every check's tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Mode-choice equilibria under every fare regime.
    Equilibrium,
    /// Rush-hour queue and arrival-rate profile for one mode split.
    Profile,
    /// Day-to-day dynamics: trajectories, rest-point stability, basin boundary.
    Stability,
    /// Time-varying tolls, their LP counterpart, Pareto and revenue checks.
    Firstbest,
    /// Fare-only optimum and the social-cost curve.
    Secondbest,
    /// Regime social costs, critical thresholds and the contour grid.
    Welfare,
    /// Capacity sweep of equilibrium costs and the paradox sign.
    Paradox,
    /// Regulatory recommendation for the current ridership.
    Strategy,
    /// Every closed form against its numerical oracle.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::Profile => "profile",
            Command::Stability => "stability",
            Command::Firstbest => "firstbest",
            Command::Secondbest => "secondbest",
            Command::Welfare => "welfare",
            Command::Paradox => "paradox",
            Command::Strategy => "strategy",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = config::load(&cli.config)?;
    let is_verify = matches!(cli.command, Command::Verify);
    if let Some(t) = cli.tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!(
                "--tol must be a non-negative number, got {t}"
            )));
        }
    }
    let validation_tol = if is_verify {
        DEFAULT_TOL
    } else {
        cli.tol.unwrap_or(DEFAULT_TOL)
    };
    let vp = validate_with_tol(cfg.params, validation_tol).map_err(CliError::Params)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cli.threads)))?;
    let ctx = Ctx {
        cfg: &cfg,
        vp: &vp,
        tol: cli.tol,
    };
    let mut out = Output::create(&cli.out, cli.command.name(), &cfg.source, cfg.params)?;
    let passed = pool.install(|| match cli.command {
        Command::Equilibrium => commands::equilibrium(&ctx, &mut out),
        Command::Profile => commands::profile(&ctx, &mut out),
        Command::Stability => commands::stability(&ctx, &mut out),
        Command::Firstbest => commands::firstbest(&ctx, &mut out),
        Command::Secondbest => commands::secondbest(&ctx, &mut out),
        Command::Welfare => commands::welfare(&ctx, &mut out),
        Command::Paradox => commands::paradox(&ctx, &mut out),
        Command::Strategy => commands::strategy(&ctx, &mut out),
        Command::Verify => commands::verify(&ctx, &mut out),
    })?;
    for file in out.finish(passed)? {
        println!("wrote {}", cli.out.join(file).display());
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: self-check failed, see summary.toml", cli.command.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
