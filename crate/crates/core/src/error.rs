use std::path::PathBuf;

use crate::diagnostics::ParseError;
use crate::features::FeatureError;
use crate::ingest::IngestError;
use crate::measures::MeasureError;
use crate::rankfit::FitError;
use crate::report::ReportError;
use crate::synth::SynthError;

/// Any pipeline failure, tagged with the stage it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("diagnostics: {0}")]
    Parse(#[from] ParseError),
    #[error("measures: {0}")]
    Measure(#[from] MeasureError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("fit: {spec}: {source}")]
    Fit { spec: String, source: FitError },
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Ingest(_) => "ingest",
            Error::Parse(_) => "diagnostics",
            Error::Measure(_) => "measures",
            Error::Feature(_) => "features",
            Error::Fit { .. } => "fit",
            Error::Report(_) => "report",
            Error::Synth(_) => "synth",
            Error::Config(_) => "config",
            Error::Io { stage, .. } => stage,
        }
    }

    pub(crate) fn io(
        stage: &'static str,
        path: impl Into<PathBuf>,
    ) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io {
            stage,
            path,
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
