//! Experiment harness: configuration, drivers, CSV and SVG output.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind, GraphSource, Settings};
pub use experiments::{ExperimentOutput, RoundSummary};
pub use plot::{LineChart, Series};
pub use table::Table;
