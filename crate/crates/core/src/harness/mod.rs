//! Experiment driver: config files, sweeps, presets and CSV output.

pub mod config;
pub mod output;
pub mod preset;
pub mod sweep;

pub use config::{parse_config, render_config, ParseError, ParsedConfig};
pub use output::{aggregate_csv, raw_csv, write_aggregate, write_raw, OutputError};
pub use preset::{preset, Preset};
pub use sweep::{sweep, AggregateRow, RawRow, SweepError, SweepResult, SweepSpec};
