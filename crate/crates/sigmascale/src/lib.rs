//! Standard-library companion to `sigmascale-core`: PNG and CSV IO, run
//! configuration, rayon-parallel profiling and the analysis commands used by
//! the `sigmascale` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use config::{CorpusSource, RunConfig};
pub use error::{Error, Result};
