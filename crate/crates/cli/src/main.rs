//! Batch front end for the hybridnet toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  1  input, parse or configuration error
  2  infeasible instance (for example disconnected sites)";

#[derive(Parser, Debug)]
#[command(name = "hybridnet", version, about = "Design and evaluate hybrid microwave/fiber networks", after_help = EXIT_HELP)]
struct Cli {
    /// JSON run configuration; relative input paths resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice (tower culling, weather sampling, simulation).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override a config value, e.g. `--set los.f_ghz=18` or `--set design.budgets=[0,50]`.
    /// Values parse as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Cull towers and build the line-of-sight hop graph.
    Hopgraph,
    /// Solve the link design for every budget of the ladder.
    Design,
    /// Fiber-only stretch, greedy pruning curve and lease cost.
    Fiber,
    /// Size the final design for the aggregate rate and cost it.
    Augment,
    /// Reroute the final design under rain outages.
    Weather,
    /// Packet-level simulation of the final design.
    Simulate,
    /// Write the final design as GeoJSON.
    ExportGeojson,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err
        .chain()
        .filter_map(|e| e.downcast_ref::<hybridnet::Error>())
        .any(|e| e.is_infeasibility());
    if infeasible {
        2
    } else {
        1
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        cfg,
        out: cli.out.clone(),
    };
    ctx.echo_config()?;
    match cli.command {
        Command::Hopgraph => commands::hopgraph(&ctx),
        Command::Design => commands::design(&ctx),
        Command::Fiber => commands::fiber(&ctx),
        Command::Augment => commands::augment_cmd(&ctx),
        Command::Weather => commands::weather(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::ExportGeojson => commands::export_geojson(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
