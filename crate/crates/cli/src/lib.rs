//! Command-line experiments for nonnegative tensor ring decomposition:
//! file formats, image ingestion, synthetic datasets, and the fit / cluster
//! / classify / sweep / basis drivers with their run manifests.

pub mod args;
pub mod error;
pub mod experiment;
pub mod files;
pub mod ingest;
pub mod manifest;
pub mod pnm;
pub mod synth;

pub use args::{dispatch, Cli};
pub use error::{CliError, CliResult};
pub use experiment::ExperimentConfig;
