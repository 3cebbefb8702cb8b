//! File formats, dataset and model persistence, reports and the `reorient`
//! command line, on top of `reorient-core`.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod model;
pub mod report;

pub use error::{Error, Result};
