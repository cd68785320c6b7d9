//! Run orchestration for `bohm-core`: configuration files and flags, the
//! `propagate`, `trajectories`, `verify` and `conditions` subcommands, and
//! their CSV/JSON artifacts.

pub mod args;
pub mod config;
pub mod error;
pub mod run;

pub use config::{Backend, Command, RunConfig, Settings, Source};
pub use error::CliError;
pub use run::{run, Check, Manifest};
