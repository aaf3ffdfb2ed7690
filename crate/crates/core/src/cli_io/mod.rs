//! Configuration files, CSV outputs and the subcommands behind the binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_equilibrium, cmd_simulate, cmd_verify, exit_code, format_checks, parse_sweep,
    CheckOutcome, SimulationSummary, EXIT_VERIFICATION_FAILED,
};
pub use config::{load_config, parse_config, InitialCondition, RunConfig};
pub use output::{read_snapshot, write_snapshot, Snapshot};
