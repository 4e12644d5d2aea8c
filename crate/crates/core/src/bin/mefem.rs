use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mefem::cli::{run, Command, Overrides, EXIT_USAGE};

/// Magneto-elastostatic FEM solver and stability analysis.
#[derive(Parser)]
#[command(name = "mefem", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check minimal positivity and tensor admissibility of the material.
    CheckMaterial(Common),
    /// Assemble and solve the coupled system; write fields and residuals.
    Solve(Common),
    /// Estimate discrete inf-sup constants over a refinement family.
    Infsup(Common),
    /// Run a manufactured-solution convergence study.
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cells per cube edge. For infsup the levels become 1..=N, for
    /// convergence the doubling sequence 2, 4, ... up to N.
    #[arg(long)]
    mesh_n: Option<usize>,
    /// Lagrange degree (1 or 2).
    #[arg(long)]
    degree: Option<usize>,
}

fn threads() -> Result<usize, String> {
    match std::env::var("MEFEM_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("MEFEM_THREADS must be a positive integer, got '{v}'")),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let n = match threads() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let (command, common) = match cli.command {
        Cmd::CheckMaterial(c) => (Command::CheckMaterial, c),
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Infsup(c) => (Command::Infsup, c),
        Cmd::Convergence(c) => (Command::Convergence, c),
    };
    let overrides = Overrides { output_dir: common.out, mesh_n: common.mesh_n, degree: common.degree };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
    let outcome = pool.install(|| run(command, common.config.as_deref(), &overrides));
    if outcome.exit_code == 0 {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
