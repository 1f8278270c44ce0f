//! Command-line entry point.

use clap::{Args, Parser, Subcommand};
use porowave::{
    cmd_emit_plots, cmd_run_viscoelastic, cmd_run_viscous, cmd_solve_elliptic, cmd_study,
    parse_config_file, RunContext, EXIT_VALIDATION,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "porowave",
    version,
    about = "Viscous and viscoelastic porosity-pressure flow in porous media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for snapshots, CSV and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Snapshot stride (overrides the config).
    #[arg(long)]
    stride: Option<usize>,
    /// Also write legacy VTK structured-points files.
    #[arg(long)]
    vtk: bool,
    /// Worker threads (falls back to POROWAVE_THREADS, then 1).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized estimates (safe-horizon sampling).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the instantaneous elliptic pressure balance at the initial state.
    SolveElliptic(RunArgs),
    /// Integrate the viscous limit (explicit Euler or Picard).
    RunViscous(RunArgs),
    /// Integrate the coupled viscoelastic model.
    RunViscoelastic(RunArgs),
    /// Run a named property study (euler-convergence, jump-invariance,
    /// gronwall, contraction-scaling, bv-growth, variant-gap,
    /// galerkin-crosscheck).
    Study {
        /// Study name.
        name: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Emit gnuplot-ready tables and a plotting script from a run directory.
    EmitPlots {
        /// Directory produced by a previous run.
        run_dir: PathBuf,
    },
}

fn thread_count(requested: Option<usize>) -> Result<usize, String> {
    let n = match requested {
        Some(n) => n,
        None => match std::env::var("POROWAVE_THREADS") {
            Ok(v) => v
                .parse::<usize>()
                .map_err(|_| format!("POROWAVE_THREADS = {v:?} is not a thread count"))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err("thread count must be at least 1".into());
    }
    Ok(n)
}

fn run_with_config(
    args: &RunArgs,
    f: impl FnOnce(&porowave::Config, &RunContext) -> Result<i32, porowave::CmdError>,
) -> i32 {
    let threads = match thread_count(args.threads) {
        Ok(n) => n,
        Err(m) => {
            eprintln!("porowave: {m}");
            return EXIT_VALIDATION;
        }
    };
    let config = match parse_config_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("porowave: {e}");
            return EXIT_VALIDATION;
        }
    };
    let ctx = RunContext {
        out_dir: args.out.clone(),
        stride: args.stride,
        vtk: args.vtk,
        threads,
        seed: args.seed,
    };
    match f(&config, &ctx) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("porowave: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::SolveElliptic(args) => run_with_config(args, cmd_solve_elliptic),
        Command::RunViscous(args) => run_with_config(args, cmd_run_viscous),
        Command::RunViscoelastic(args) => run_with_config(args, cmd_run_viscoelastic),
        Command::Study { name, args } => {
            run_with_config(args, |config, ctx| cmd_study(name, config, ctx))
        }
        Command::EmitPlots { run_dir } => match cmd_emit_plots(run_dir) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("porowave: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
