//! Configuration parsing, commands and file formats behind the
//! `fracphase` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{check_complete, cmd_convergence, cmd_simulate, CliError, SimulationSummary};
pub use config::{parse_config, ConfigError, InitialCondition, RunConfig};
