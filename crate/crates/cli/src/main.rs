use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;

use output::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "liouville-lab",
    version,
    about = "Liouville-property experiments for Hörmander sub-Laplacians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Homogeneity, divergence, Hörmander rank and non-degeneracy of a frame.
    CheckFrame(Flags),
    /// Monte Carlo surface factor S(r) and its power-law fit.
    SurfaceFactor(Flags),
    /// Sufficient condition for the Liouville property.
    Criterion(Flags),
    /// One Dirichlet problem on a box.
    Solve(Flags),
    /// Invading-domain experiment across α and γ.
    Dichotomy(Flags),
    /// Superharmonicity of an explicit barrier.
    Barrier(Flags),
}

#[derive(clap::Args, Debug, Clone)]
pub struct Flags {
    /// JSON config; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for the JSON report and CSV dumps.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

fn run(cmd: &Command) -> Result<bool, CliError> {
    let (name, flags) = match cmd {
        Command::CheckFrame(f) => ("check-frame", f),
        Command::SurfaceFactor(f) => ("surface-factor", f),
        Command::Criterion(f) => ("criterion", f),
        Command::Solve(f) => ("solve", f),
        Command::Dichotomy(f) => ("dichotomy", f),
        Command::Barrier(f) => ("barrier", f),
    };
    if let Some(t) = flags.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let raw = match &flags.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => "{}".to_string(),
    };
    let outcome = commands::dispatch(name, &raw, flags.seed)?;
    output::emit(&outcome, flags.out.as_deref())?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
