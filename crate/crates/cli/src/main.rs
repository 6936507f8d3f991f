use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use parab2_cli::{configure_threads, error_json, execute, Command};

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    /// Sample the pencil bounds on a sector.
    Check,
    /// Solve the Cauchy problem by contour integral and by time stepping.
    Solve,
    /// Tabulate the scalar (ε, α, φ) phase diagram.
    Sweep,
    /// Tabulate time-regularity norms of a path.
    Norms,
}

#[derive(Parser)]
#[command(name = "parab2", version, about = "Maximal regularity toolkit for ü + Bů + Au = f")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads(std::env::var("PARAB2_THREADS").ok().as_deref()) {
        eprint!("{}", error_json(&e));
        return ExitCode::from(e.exit_code() as u8);
    }
    let command = match args.command {
        Cmd::Check => Command::Check,
        Cmd::Solve => Command::Solve,
        Cmd::Sweep => Command::Sweep,
        Cmd::Norms => Command::Norms,
    };
    ExitCode::from(execute(command, &args.config, args.out.as_deref()) as u8)
}
