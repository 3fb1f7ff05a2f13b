//! Configuration-driven experiment harness for the `covloc` library: TOML
//! experiment configs, the figure registry and the `covloc` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod figures;
pub mod output;
pub mod svg;

pub use config::{ExperimentConfig, OutputKind, ResolvedConfig};
pub use error::{CliError, CliResult};
pub use figures::{run_figure, ScaleTable, FIGURES};
