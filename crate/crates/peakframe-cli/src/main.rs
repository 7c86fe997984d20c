//! Thin command-line driver: parses arguments, loads the configuration,
//! delegates to the library runner, prints the human-readable summary, and
//! maps outcomes to the documented exit codes (0 ok, 1 check failure,
//! 2 solver abort, 3 configuration error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use peakframe::runner::{
    check_experiment, exit_code_for, load_config, oracle_compare_experiment, run_experiment,
    sweep_experiment, RunConfig, EXIT_ABORT,
};

#[derive(Parser)]
#[command(
    name = "peakframe",
    version,
    about = "Two-speed kinetic chemotaxis model in the attractant-peak frame"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration (TOML; empty file = all defaults).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key override, e.g. --set params.chi=0.6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model; write the diagnostics series and snapshots.
    Run(CommonArgs),
    /// Execute the full acceptance property suite; write the report.
    Check(CommonArgs),
    /// Convergence comparison of the grid solver against the
    /// integral-equation solver.
    OracleCompare(CommonArgs),
    /// Cartesian parameter sweep; per-point series plus a summary table.
    Sweep(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Run(c) | Command::Check(c) | Command::OracleCompare(c) | Command::Sweep(c) => {
                c
            }
        }
    }
}

fn dispatch(command: &Command, cfg: &RunConfig) -> peakframe::error::Result<i32> {
    match command {
        Command::Run(_) => {
            let artifacts = run_experiment(cfg)?;
            let state = &artifacts.output.trajectory.final_state;
            println!(
                "finished at t = {:.6}, x = {:.6e}, max|W| = {:.6e}",
                state.t,
                state.x,
                state.w.max_abs()
            );
            if let Some(abort) = &artifacts.output.abort {
                println!("solver abort ({}) at t = {:.6}: {}", abort.kind, abort.t, abort.detail);
            }
            for path in &artifacts.written {
                println!("wrote {path}");
            }
            Ok(artifacts.exit_code)
        }
        Command::Check(_) => {
            let (report, code) = check_experiment(cfg)?;
            print!("{}", report.render_lines());
            Ok(code)
        }
        Command::OracleCompare(_) => {
            let (report, code) = oracle_compare_experiment(cfg)?;
            print!("{}", report.render_table());
            Ok(code)
        }
        Command::Sweep(_) => {
            let (summary, code) = sweep_experiment(cfg)?;
            print!("{}", summary.render_table());
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.common();
    let cfg = match load_config(&args.config, &args.set) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit_code_for(&err) as u8);
        }
    };
    match dispatch(&cli.command, &cfg) {
        Ok(code) => {
            if code == EXIT_ABORT {
                eprintln!("solver aborted; partial outputs were written");
            }
            ExitCode::from(code as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
