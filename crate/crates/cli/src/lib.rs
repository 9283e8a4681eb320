//! Configuration-file driven front end for `viscowave-core`.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, Cli};
pub use config::{ConfigError, RunConfig};
pub use output::{canonical_json, read_series, write_series, SERIES_HEADER};
