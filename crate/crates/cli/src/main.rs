use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bqnpm_cli::config::parse_sweep;
use bqnpm_cli::{runner, CliError, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bqnpm", version, about = "Mini-batch quasi-Newton proximal reconstruction experiments")]
struct Cli {
    /// Override the top-level seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the config's `outdir`, else `out`).
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver of an experiment config.
    Run { config: PathBuf },
    /// Repeat an experiment over values of one parameter
    /// (K_s, gamma, step, lambda, eta_max, max_outer).
    Sweep {
        config: PathBuf,
        /// e.g. `K_s=1,2,4,6`
        #[arg(long)]
        param: String,
    },
    /// Plot existing trace CSV files.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn outdir(cli: &Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.clone()
        .or_else(|| cfg.and_then(|c| c.outdir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, cli.seed)?;
            let dir = outdir(&cli.outdir, Some(&cfg));
            let result = runner::run_experiment(&cfg, &dir);
            if !cli.quiet {
                if let Ok(text) = std::fs::read_to_string(dir.join("summary.txt")) {
                    print!("{text}");
                }
            }
            result.map(|_| ())
        }
        Command::Sweep { config, param } => {
            let cfg = load(config, cli.seed)?;
            let (name, values) = parse_sweep(param)?;
            let dir = outdir(&cli.outdir, Some(&cfg));
            let result = runner::sweep(&cfg, &name, &values, &dir);
            if !cli.quiet {
                if let Ok(text) = std::fs::read_to_string(dir.join("summary.txt")) {
                    print!("{text}");
                }
            }
            result.map(|_| ())
        }
        Command::Plot { traces } => {
            let files = runner::plot_traces(traces, &outdir(&cli.outdir, None))?;
            if !cli.quiet {
                for f in files {
                    println!("{}", f.display());
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
