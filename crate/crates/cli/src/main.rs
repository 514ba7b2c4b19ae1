use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use synthesol_cli::{run, Command, Invocation};

/// Optimal synthesis for discounted Lagrangian problems on compact manifolds.
#[derive(Parser, Debug)]
#[command(name = "synthesol", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Synthesize even when the curvature condition fails.
    #[arg(long)]
    force: bool,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field CSV to validate, overriding `validate.field`.
    #[arg(long)]
    field: Option<PathBuf>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SYNTHESOL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("SYNTHESOL_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("synthesol: {e}");
        return ExitCode::from(2);
    }
    let inv = Invocation { command: args.command, config: args.config, force: args.force, out: args.out, field: args.field };
    let mut stdout = std::io::stdout().lock();
    match run(&inv, &mut stdout) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("synthesol: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
