//! Command-line orchestration of C-Tree experiments.

pub mod args;
pub mod error;
pub mod run;
pub mod spec;

pub use args::Args;
pub use error::CliError;
pub use run::{run, Outcome};
pub use spec::ExperimentSpec;
