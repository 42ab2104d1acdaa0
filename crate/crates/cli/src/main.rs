use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clusterflow::{parse_config, replay, run_config, Error, SimConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "clusterflow", about = "Finite-volume clustering simulator with a-priori estimate ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Run { config: PathBuf },
    /// Validate a config file and print it with all defaults filled in.
    Check { config: PathBuf },
    /// Recompute margins from a ledger and norms from its snapshots.
    Replay { ledger: PathBuf, snapshots: PathBuf },
    /// Print the version.
    Version,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Solver { .. } | Error::Integrity { .. } => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

fn load(path: &Path) -> Result<SimConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// `CLUSTERFLOW_THREADS`: 1 keeps everything on one thread, 0 or unset picks
/// automatically, larger values allow the two velocity components to be
/// solved concurrently.
fn parallel_from_env() -> Result<bool, String> {
    match std::env::var("CLUSTERFLOW_THREADS") {
        Err(_) => Ok(auto_parallel()),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(auto_parallel()),
            Ok(1) => Ok(false),
            Ok(_) => Ok(true),
            Err(_) => Err(format!("CLUSTERFLOW_THREADS must be a nonnegative integer, got `{v}`")),
        },
    }
}

fn auto_parallel() -> bool {
    std::thread::available_parallelism().is_ok_and(|n| n.get() > 1)
}

fn cmd_run(path: &Path) -> u8 {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let parallel = match parallel_from_env() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    match run_config(&cfg, parallel) {
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Ok(out) => {
            let row = &out.last_row;
            println!(
                "steps {} t {} mass {} linf {} ledger {} snapshots {}",
                out.steps,
                out.t_final,
                row.mass,
                row.linf,
                out.ledger.display(),
                out.snapshots.len()
            );
            match out.abort {
                None => 0,
                Some(report) => {
                    eprintln!("{report}");
                    EXIT_ABORT
                }
            }
        }
    }
}

fn cmd_replay(ledger: &Path, snapshots: &Path) -> u8 {
    match replay(ledger, snapshots) {
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Ok(rep) => {
            for c in &rep.checks {
                println!("{:<24} compared {:>6}  max rel {:.3e} (step {})", c.quantity, c.compared, c.max_rel, c.worst_step);
            }
            println!(
                "rows {} snapshots {}/{} matched, max rel {:.3e}: {}",
                rep.rows,
                rep.snapshots_matched,
                rep.snapshots,
                rep.max_rel(),
                if rep.passed() { "ok" } else { "MISMATCH" }
            );
            if rep.passed() {
                0
            } else {
                EXIT_SOLVER
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Check { config } => match load(&config) {
            Ok(cfg) => {
                print!("{}", cfg.echo());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        Command::Replay { ledger, snapshots } => cmd_replay(&ledger, &snapshots),
        Command::Version => {
            println!("clusterflow {}", env!("CARGO_PKG_VERSION"));
            0
        }
    };
    ExitCode::from(code)
}
