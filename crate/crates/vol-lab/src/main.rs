use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use vol_lab::{run, ExperimentConfig, ExperimentKind, RunError};

#[derive(Debug, Parser)]
#[command(name = "vol-lab", version, about = "Short-maturity implied volatility experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides `sim.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo paths (overrides `sim.n_paths`).
        #[arg(long)]
        paths: Option<usize>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the available experiment kinds.
    ListExperiments,
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<22} {}", kind.name(), kind.description());
            }
            Ok(())
        }
        Command::Run {
            config,
            out,
            seed,
            paths,
            threads,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.sim.seed = seed;
            }
            if let Some(paths) = paths {
                cfg.sim.n_paths = paths;
            }
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            if let Some(n) = threads {
                // Only fails if a pool already exists, which cannot happen here.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let output = run(&cfg)?;
            let files = output.write(&cfg.output.dir, cfg.output.emit_svg)?;
            for line in &output.summary {
                println!("{line}");
            }
            for f in files {
                info!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
