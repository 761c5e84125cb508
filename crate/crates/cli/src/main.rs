use std::path::PathBuf;
use std::process::ExitCode;

use andersonspec_cli::config::{Command, ExperimentConfig, Format, Overrides};
use andersonspec_cli::error::CliError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "andersonspec",
    version,
    about = "Exponent spectra of block tridiagonal Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Eigenvalue point clouds of H over seeds, xi and phi sweeps.
    Spectrum(Flags),
    /// Jensen counting curve and its breakpoints (transfer-matrix exponents).
    Exponents(Flags),
    /// K-based counting curve (Lyapunov exponents of T^dagger T).
    Lyapunov(Flags),
    /// One-dimensional suite: exponents, wings and loops, Thouless, xi_c scan.
    Hatano(Flags),
    /// Randomized residual checks of the duality and symmetry identities.
    Verify(Flags),
    /// Density of states histogram and Thouless exponent.
    Dos(Flags),
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: $ANDERSONSPEC_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Initial number of quadrature angles.
    #[arg(long)]
    angles: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Sub {
    fn split(self) -> (Command, Flags) {
        match self {
            Sub::Spectrum(f) => (Command::Spectrum, f),
            Sub::Exponents(f) => (Command::Exponents, f),
            Sub::Lyapunov(f) => (Command::Lyapunov, f),
            Sub::Hatano(f) => (Command::Hatano, f),
            Sub::Verify(f) => (Command::Verify, f),
            Sub::Dos(f) => (Command::Dos, f),
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Config(e.to_string().trim_end().to_string())),
    };
    faer::set_global_parallelism(faer::Par::Seq);
    let (command, flags) = cli.command.split();
    let config = match &flags.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: flags.seed,
        workers: flags.workers,
        out: flags.out,
        format: flags.format,
        angles: flags.angles,
        tol: flags.tol,
    };
    match andersonspec_cli::execute(command, config, &overrides) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
