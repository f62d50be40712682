//! Pipeline behind the `bsts` binary: ingest exported market and poll files,
//! fit the national regression, run rolling forecasts for both sources and
//! compare them.

pub mod error;
pub mod pipeline;
pub mod svg;

pub use error::{CliError, CliResult};
pub use pipeline::{cmd_compare, cmd_fit, cmd_forecast, cmd_ingest, cmd_run, RunConfig};
