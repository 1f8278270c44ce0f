//! Configuration, run orchestration and file formats for the porowave
//! solvers. The numerical kernels live in `porowave-core`; this crate owns
//! everything that touches the filesystem or the process boundary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_emit_plots, cmd_run_viscoelastic, cmd_run_viscous, cmd_solve_elliptic, cmd_study,
    CmdError, RunContext, EXIT_BOUND, EXIT_INTERNAL, EXIT_NON_CONTRACTION, EXIT_OK,
    EXIT_VALIDATION,
};
pub use config::{echo_config, parse_config, parse_config_file, Config, ConfigError};
