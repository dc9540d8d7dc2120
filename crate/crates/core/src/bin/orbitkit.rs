use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitkit::cli::{catalog_listing, check_command, run_command, RunOptions};

#[derive(Parser)]
#[command(name = "orbitkit", version, about = "Orbits of families of vector fields, from scenario files")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every command of a scenario and write its report
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "orbitkit-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "unsafe")]
        allow_unsafe: bool,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List builtin families
    Catalog,
    /// Parse and validate a scenario without running it
    Check { scenario: PathBuf },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("ORBITKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let (code, msg) = match args.command {
        Command::Run {
            scenario,
            out,
            seed,
            allow_unsafe,
            tol,
        } => {
            let opts = RunOptions {
                seed,
                allow_unsafe,
                tol,
                timestamp: None,
            };
            run_command(&scenario, &out, &opts)
        }
        Command::Catalog => (0, catalog_listing()),
        Command::Check { scenario } => check_command(&scenario),
    };
    if code == 0 {
        print!("{msg}");
    } else {
        eprint!("{msg}");
    }
    ExitCode::from(code as u8)
}
