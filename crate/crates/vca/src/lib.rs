//! File formats, atomic output, thread-pooled drivers and the `vca`
//! command-line tool on top of [`vca_core`].

pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod external;
pub mod fsio;
pub mod manifest;
pub mod model;
pub mod par;
pub mod plan;
pub mod scenario_dir;
pub mod trials;
pub mod vcae;

pub use error::{Error, Result};
pub use vca_core as core;
