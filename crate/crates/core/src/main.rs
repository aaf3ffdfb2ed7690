use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phasesep::cli_io::{self, RunConfig};

#[derive(Parser)]
#[command(name = "phasesep", version, about = "Solid-liquid phase transition in a gravity-loaded rigid column")]
struct Cli {
    /// Output directory; overrides `[output] dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-integrate the configured run and write trajectory and snapshots.
    Simulate { config: PathBuf },
    /// Solve for the equilibrium at the boundary temperature(s).
    Equilibrium {
        config: PathBuf,
        /// Boundary temperature sweep `lo:hi:n`.
        #[arg(long)]
        sweep: Option<String>,
        /// Describe the admissible sets of the gravity-free problem.
        #[arg(long)]
        zero_gravity: bool,
    },
    /// Run the property checks and print a pass/fail table.
    Verify { config: PathBuf },
}

fn out_dir(cli_out: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| cfg.output_dir.clone())
}

fn fail(e: phasesep::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(cli_io::exit_code(&e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config_path = match &cli.command {
        Command::Simulate { config } | Command::Equilibrium { config, .. } | Command::Verify { config } => config,
    };
    let cfg = match cli_io::load_config(config_path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let out = out_dir(&cli.out, &cfg);
    match &cli.command {
        Command::Simulate { .. } => match cli_io::cmd_simulate(&cfg, &out) {
            Ok(s) => {
                println!(
                    "{} steps to t = {:.6}; wrote {} and {} snapshots",
                    s.steps_taken,
                    s.final_state.t,
                    s.trajectory.display(),
                    s.snapshots.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Equilibrium {
            sweep,
            zero_gravity,
            ..
        } => {
            let temps = match sweep.as_deref().map(cli_io::parse_sweep).transpose() {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            match cli_io::cmd_equilibrium(&cfg, temps.as_deref(), *zero_gravity, &out) {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { .. } => match cli_io::cmd_verify(&cfg) {
            Ok(checks) => {
                print!("{}", cli_io::format_checks(&checks));
                if checks.iter().all(|c| c.passed) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(cli_io::EXIT_VERIFICATION_FAILED)
                }
            }
            Err(e) => fail(e),
        },
    }
}
