use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qids::config::RunConfig;
use qids::pipeline::{self, Command};
use qids::Error;

#[derive(Parser)]
#[command(name = "qids", version, about = "Quantum-vs-classical PCA intrusion detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit classical and simulated quantum detectors and report metrics.
    Fit(Args),
    /// Measure dataset parameters and locate the quantum advantage frontier.
    Crossover(Args),
    /// Empirical tomography error against sample budget.
    TomographyStudy(Args),
    /// QRAM resource estimates for the configured hardware presets.
    Resources(Args),
    /// Calinski-Harabasz comparison of k-means and q-means.
    QmeansStudy(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Run with this single seed instead of the configured ones.
    #[arg(short, long)]
    seed: Option<u64>,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 2,
        "io" => 3,
        "data" => 4,
        _ => 1,
    }
}

fn execute(command: Command, args: &Args) -> Result<(), Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let files = pipeline::run(command, &cfg, &out)?;
    for f in &files {
        println!("{}  {}", f.sha256, out.join(&f.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Crossover(a) => (Command::Crossover, a),
        Cmd::TomographyStudy(a) => (Command::TomographyStudy, a),
        Cmd::Resources(a) => (Command::Resources, a),
        Cmd::QmeansStudy(a) => (Command::QmeansStudy, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
