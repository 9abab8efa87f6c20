//! `rsp`: command-line driver for the random singlet phase simulations.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, SweepMode};
use error::CliError;
use output::Outputs;

#[derive(Parser)]
#[command(name = "rsp", version, about = "Random singlet phase simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON config file, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every realization derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensembles (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one chain.
    Sample,
    /// RSRG Monte Carlo: survival and nesting curves.
    Rsrg,
    /// Nearest-neighbour pairing without renormalization.
    Norg,
    /// Scalar flow equation.
    Flow,
    /// Nesting-resolved flow equation.
    Jointflow,
    /// Exact ground-state pairing against RSRG.
    EdCompare,
    /// Bond-breaking rates under a field sweep.
    Sweep {
        /// Isolated pairs at a range of separations.
        #[arg(long)]
        two_atom: bool,
        /// 1000 realizations of 12 atoms on 100 sites.
        #[arg(long)]
        full_scale: bool,
    },
    /// Optimal paired fraction under incoherent loss.
    Fidelity,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Rsrg => "rsrg",
            Command::Norg => "norg",
            Command::Flow => "flow",
            Command::Jointflow => "jointflow",
            Command::EdCompare => "ed-compare",
            Command::Sweep { .. } => "sweep",
            Command::Fidelity => "fidelity",
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.common.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &cli.common.out {
        cfg.out = out.clone();
    }
    if let Command::Sweep {
        two_atom,
        full_scale,
    } = cli.command
    {
        if two_atom {
            cfg.sweep.mode = SweepMode::TwoAtom;
        }
        if full_scale {
            cfg.sweep.full_scale = true;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    let mut out = Outputs::create(&cfg.out)?;
    let mut deferred = None;
    let summary = match cli.command {
        Command::Sample => commands::sample(&cfg, &mut out)?,
        Command::Rsrg => commands::rsrg(&cfg, &mut out)?,
        Command::Norg => commands::norg(&cfg, &mut out)?,
        Command::Flow => commands::flow(&cfg, &mut out)?,
        Command::Jointflow => commands::jointflow(&cfg, &mut out)?,
        Command::EdCompare => commands::ed_compare_cmd(&cfg, &mut out)?,
        Command::Sweep { .. } => {
            let (summary, err) = commands::sweep(&cfg, &mut out)?;
            deferred = err;
            summary
        }
        Command::Fidelity => commands::fidelity(&cfg, &mut out)?,
    };
    out.manifest(cli.command.name(), &cfg, summary)?;
    match deferred {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
