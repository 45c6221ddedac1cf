//! File formats, a parallel executor and the command-line driver built on
//! [`ancova_core`].

pub mod analysis;
pub mod csv_io;
pub mod error;
pub mod exec;
pub mod json;
pub mod output;
pub mod reproduce;
pub mod scenarios;
pub mod sweep;

pub use analysis::{analyze, Analysis, AnalysisOptions};
pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use error::{Error, Result};
pub use exec::Parallel;
pub use output::{Format, Table};
pub use sweep::{sweep, Manifest, SweepOptions};
