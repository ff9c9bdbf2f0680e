//! Programming-error measures over autograded snapshot logs and rank-based
//! regressions that relate them to exam grades.
//!
//! The pipeline runs [`ingest`] → [`diagnostics`] → [`measures`] →
//! [`features`] → [`rankfit`] → [`report`]; [`synth`] generates seeded
//! cohorts in the same file formats and [`pipeline`] wires the stages
//! together for the command-line tool.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod ingest;
pub mod measures;
pub mod pipeline;
pub mod rankfit;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
