use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rnas_core::tasks::DatasetManifest;

#[derive(Parser)]
#[command(name = "rnas", version, about = "Evolutionary multi-objective search over recurrent cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search and write its run directory.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render an architecture document as Graphviz DOT.
    Render {
        architecture: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an aⁿbⁿcⁿ dataset.
    Dataset {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score the seed encodings.
    Baselines {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search { config, out, seed } => rnas_cli::cmd_search(&config, &out, seed),
        Command::Render { architecture, out } => rnas_cli::cmd_render(&architecture, out.as_deref()).map(|dot| {
            if out.is_none() {
                print!("{dot}");
            }
        }),
        Command::Dataset { count, n_min, n_max, seed, out } => {
            rnas_cli::cmd_dataset(DatasetManifest { seed, count, n_min, n_max }, &out)
        }
        Command::Baselines { config, seed, csv } => rnas_cli::cmd_baselines(&config, seed, csv).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
