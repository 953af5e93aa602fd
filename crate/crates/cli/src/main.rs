use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualmink_cli::{run_command, Command};

/// Solver and verification suites for the L_p dual Minkowski problem under
/// finite group symmetry.
///
/// Exit codes: 0 success, 1 I/O error, 2 config error, 3 hypothesis
/// violation, 4 non-convergence, 5 bound violation, 6 self-test failure.
#[derive(Debug, Parser)]
#[command(name = "dualmink", version)]
struct Cli {
    /// Directory that receives one new sub-directory per run.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve the measure equation described by a config file.
    Solve { config: PathBuf },
    /// Run a bounds sweep and report how many cases fall inside.
    VerifyBounds { config: PathBuf },
    /// Build symmetric, non-origin-symmetric bodies and certify them.
    Construct { config: PathBuf },
    /// Run the built-in consistency checks.
    Selftest,
    /// Re-export a body file as CSV and, with --mesh, as an OBJ mesh.
    Export {
        body: PathBuf,
        #[arg(long)]
        mesh: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Solve { config } => Command::Solve { config },
        Cmd::VerifyBounds { config } => Command::VerifyBounds { config },
        Cmd::Construct { config } => Command::Construct { config },
        Cmd::Selftest => Command::Selftest,
        Cmd::Export { body, mesh } => Command::Export { body, mesh },
    };
    match run_command(&command, &cli.out) {
        Ok(out) => {
            println!("{}: {}", command.name(), out.summary);
            println!("run directory: {}", out.dir.display());
            if let Some(e) = &out.failure {
                eprintln!("error: {e}");
            }
            ExitCode::from(out.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
