//! Command-line campaign runner.

use std::path::PathBuf;
use std::process::ExitCode;

use carnot_sio::experiments::{run_campaign, Experiment, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "carnot-sio", version, about = "Singular integrals on horizontal curves in Carnot groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Group structure and sampled group-law identities.
    GroupInfo,
    /// Lift a curve and export it.
    Lift,
    /// Flatness exponents.
    Flatness,
    /// Annular integrals of kernels on horizontal lines.
    Annular,
    /// Truncated operator norms across ε.
    UniformL2,
    /// Christ dyadic cubes.
    Christ,
    /// Testing condition on Christ cubes.
    TestingCondition,
    /// Area formula against a covering estimate.
    AreaFormula,
    /// Every experiment.
    All,
}

impl Command {
    fn experiments(self) -> Vec<Experiment> {
        match self {
            Command::GroupInfo => vec![Experiment::GroupInfo],
            Command::Lift => vec![Experiment::Lift],
            Command::Flatness => vec![Experiment::Flatness],
            Command::Annular => vec![Experiment::Annular],
            Command::UniformL2 => vec![Experiment::UniformL2],
            Command::Christ => vec![Experiment::Christ],
            Command::TestingCondition => vec![Experiment::TestingCondition],
            Command::AreaFormula => vec![Experiment::AreaFormula],
            Command::All => Experiment::ALL.to_vec(),
        }
    }
}

fn run(cli: &Cli) -> carnot_sio::Result<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => return Err(carnot_sio::Error::Usage("--config <path> is required".into())),
    };
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| carnot_sio::Error::Usage(format!("--threads: {e}")))?;
    }
    let reports = run_campaign(&cli.command.experiments(), &config)?;
    let mut pass = true;
    for r in &reports {
        for v in &r.verdicts {
            println!("{} {}:{} {}", if v.pass { "PASS" } else { "FAIL" }, r.experiment, v.name, v.detail);
        }
        pass &= r.pass();
    }
    println!("reports written to {}", config.output_dir().display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
