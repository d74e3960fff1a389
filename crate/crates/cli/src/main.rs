mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vmscale::orchestrator::ScenarioKind;
use vmscale::placement::Engine;
use vmscale::Error;

use crate::config::RunConfig;

/// Proactive VM autoscaling and energy-aware placement driven by multi-resource forecasts.
#[derive(Debug, Parser)]
#[command(name = "vmscale", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Prediction window size in minutes.
    #[arg(long, global = true, value_name = "MINUTES")]
    pws: Option<u32>,
    /// Validate the configuration and inputs without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trace.
    Gen {
        /// Overrides the configured task count.
        #[arg(long)]
        tasks: Option<usize>,
    },
    /// Train one forecaster per VM and log convergence.
    Train {
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Train only this VM.
        #[arg(long)]
        vm: Option<String>,
    },
    /// Forecast the next interval of every VM from trained models.
    Predict {
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Directory holding the output of `train`; defaults to the output directory.
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
    },
    /// Cluster the demand of one interval and choose VM types.
    Autoscale {
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Interval index; the last one when omitted.
        #[arg(long)]
        at: Option<usize>,
    },
    /// Autoscale one interval and place the resulting VMs.
    Place {
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long)]
        at: Option<usize>,
        #[arg(long, value_parser = parse_engine)]
        engine: Option<Engine>,
    },
    /// Run the provisioning scenarios over the trace.
    Simulate {
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Comma-separated subset of OA, PA, PWA, WPWA.
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<ScenarioKind>>,
        #[arg(long, value_parser = parse_engine)]
        engine: Option<Engine>,
    },
    /// Compare predictor families across window sizes and summarize simulation runs.
    Report {
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Record training wall time; output is then no longer reproducible.
        #[arg(long)]
        timing: bool,
    },
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "ga" => Ok(Engine::Ga),
        "best_fit" | "best-fit" => Ok(Engine::BestFit),
        "random_fit" | "random-fit" => Ok(Engine::RandomFit),
        _ => Err(format!("unknown engine `{s}` (expected ga, best_fit or random_fit)")),
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn configure(cli: &Cli) -> vmscale::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.paths.out = out.clone();
    }
    if let Some(pws) = cli.pws {
        config.pws = pws;
    }
    match &cli.command {
        Command::Gen { tasks } => {
            if let Some(n) = tasks {
                config.synth.tasks = *n;
            }
        }
        Command::Train { trace, .. }
        | Command::Predict { trace, .. }
        | Command::Autoscale { trace, .. }
        | Command::Report { trace, .. } => {
            if let Some(t) = trace {
                config.paths.trace = Some(t.clone());
            }
        }
        Command::Place { trace, engine, .. } | Command::Simulate { trace, engine, .. } => {
            if let Some(t) = trace {
                config.paths.trace = Some(t.clone());
            }
            if let Some(e) = engine {
                config.engine = *e;
            }
        }
    }
    if let Command::Simulate { scenarios: Some(s), .. } = &cli.command {
        config.scenarios = s.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> vmscale::Result<()> {
    let config = configure(cli)?;
    let ctx = commands::Context::new(config, cli.dry_run);
    match &cli.command {
        Command::Gen { .. } => commands::gen(&ctx),
        Command::Train { vm, .. } => commands::train(&ctx, vm.as_deref()),
        Command::Predict { models, .. } => commands::predict(&ctx, models.as_deref()),
        Command::Autoscale { at, .. } => commands::autoscale(&ctx, *at),
        Command::Place { at, .. } => commands::place(&ctx, *at),
        Command::Simulate { .. } => commands::simulate(&ctx),
        Command::Report { timing, .. } => commands::report(&ctx, *timing),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
