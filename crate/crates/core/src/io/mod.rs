//! File formats: the binary activation dump, run configuration and reports.

pub mod config;
pub mod dump;
pub mod report;

pub use config::{NetConfig, OutputConfig, RunConfig, TrainConfig};
pub use dump::{read_dump, DumpHeader, DumpReader, DumpWriter, LoadedDump};
pub use report::{config_hash, CsvReport};
