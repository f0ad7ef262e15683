//! Command-line front end: scenario configs, run directories and plots.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use anyhow::Result;
use clap::{Parser, Subcommand};
use commands::Outcome;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "mfg", version, about = "Mean-field-game equilibrium solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Scenario config (TOML).
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` override with a dotted key, e.g. `grid.n=41`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    SolveFpk(RunArgs),
    BestResponse(RunArgs),
    Equilibrium(RunArgs),
    Certify(RunArgs),
    CheckHypotheses(RunArgs),
    ParticleCheck(RunArgs),
    /// Renders SVG plots from an existing run directory.
    Plot {
        dir: PathBuf,
    },
}

fn load(args: &RunArgs) -> Result<config::ScenarioConfig> {
    let mut overrides = args.overrides.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &args.out {
        overrides.push(format!("out={}", toml::Value::String(o.display().to_string())));
    }
    config::ScenarioConfig::load(&args.config, &overrides)
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::SolveFpk(a) => commands::solve_fpk_cmd(load(&a)?),
        Command::BestResponse(a) => commands::best_response_cmd(load(&a)?),
        Command::Equilibrium(a) => commands::equilibrium_cmd(load(&a)?),
        Command::Certify(a) => commands::certify_cmd(load(&a)?),
        Command::CheckHypotheses(a) => commands::check_hypotheses_cmd(load(&a)?),
        Command::ParticleCheck(a) => commands::particle_check_cmd(load(&a)?),
        Command::Plot { dir } => {
            for f in plot::emit_plots(&dir)? {
                log::info!("wrote {}", f.display());
            }
            Ok(Outcome::Success)
        }
    }
}
