//! Experiment runner. Configs are JSON documents selecting one of the
//! commands {dini, modulator, adversary, collapse, renorm, pde, pipeline};
//! every run writes its artifacts plus a hashed manifest.

use clap::Parser;
use degenlab::experiment::{self, ExperimentConfig, ExperimentError};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "degenlab", version, about = "numerical laboratory for degenerate diffusion equations")]
struct Cli {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized sweeps (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parameter sweeps.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("degenlab: {e}");
            e.exit_code()
        }
    });
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let text = std::fs::read_to_string(&cli.config)?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    let base = std::env::current_dir()?;
    let manifest = experiment::run(&config, &base)?;
    if cli.verbose {
        eprintln!(
            "command {:?} finished in {:.3}s, {} artifacts:",
            manifest.command,
            manifest.wall_time_secs,
            manifest.outputs.len()
        );
        for entry in &manifest.outputs {
            eprintln!("  {} ({} bytes, sha256 {})", entry.path, entry.bytes, &entry.sha256[..12]);
        }
    }
    Ok(())
}
