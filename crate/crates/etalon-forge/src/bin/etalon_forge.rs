//! Command-line front end: parse the TOML run configuration, dispatch the
//! requested pipeline command, and map failures to stable exit codes
//! (0 success, 2 config error, 3 numerical failure, 4 synthesis goal unmet).

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use etalon_forge::config::RunConfig;
use etalon_forge::pipeline::{self, CommandOutcome};
use etalon_forge::Error;

#[derive(Parser)]
#[command(
    name = "etalon-forge",
    about = "Multistage Fabry-Perot etalon modeling and cavity-length synthesis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides output.dir from the config)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Also write SVG plots of emitted profiles
    #[arg(long, global = true)]
    plot: bool,

    /// Worker threads for the length scan (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured etalon and write its transmission profile
    Simulate,
    /// Build the FSR-enhanced desired profile T_d
    Target,
    /// Run the identification order sweep against the target
    Estimate,
    /// Scan cavity lengths (escalating the cavity count) toward the PR goal
    Synthesize,
    /// Measure FSR/PR/peak metrics of a design
    Verify,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_GOAL_UNMET: u8 = 4;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Csv(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn run(cli: &Cli) -> Result<CommandOutcome, Error> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::from_path(config_path)?;
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // ignore the error if a global pool already exists (tests, reruns)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let out = pipeline::resolve_out_dir(&cfg, cli.out.as_deref());
    let plot = cli.plot || cfg.output.plot;
    match cli.command {
        Command::Simulate => pipeline::cmd_simulate(&cfg, &out, plot).map(|_| CommandOutcome::Done),
        Command::Target => pipeline::cmd_target(&cfg, &out, plot).map(|_| CommandOutcome::Done),
        Command::Estimate => pipeline::cmd_estimate(&cfg, &out).map(|_| CommandOutcome::Done),
        Command::Synthesize => pipeline::cmd_synthesize(&cfg, &out, plot),
        Command::Verify => {
            let metrics = pipeline::cmd_verify(&cfg, &out)?;
            let mut stdout = std::io::stdout().lock();
            pipeline::write_metrics_json(&metrics, &mut stdout)?;
            Ok(CommandOutcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(CommandOutcome::Done) => ExitCode::SUCCESS,
        Ok(CommandOutcome::GoalUnmet) => {
            eprintln!("synthesis finished without reaching the PR goal; see summary.json");
            ExitCode::from(EXIT_GOAL_UNMET)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
