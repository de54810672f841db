//! Scenario runner for `hj-singular`: bundled scenarios, the run
//! pipeline and plot-data export behind the `hjsing` binary.

pub mod builtin;
pub mod error;
pub mod plotdata;
pub mod runner;
pub mod scenario;

pub use error::CliError;
pub use runner::{execute, run, Format, RunOptions, RunReport};
pub use scenario::Scenario;
