//! Run configuration shared by the pipeline and the command-line tool.

use std::path::PathBuf;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::measures::{EqWeights, MeasureOptions};
use crate::rankfit::{FitOptions, LogBase, TauMethod};
use crate::report::ReportFormat;
use crate::{Error, Result};

/// Every field can come from a TOML file; absent fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub grades: Option<PathBuf>,
    pub out: PathBuf,
    pub idle_gap_minutes: f64,
    pub reset_per_session: bool,
    /// (both-fail, same-type)
    pub eq_weights: (f64, f64),
    #[serde(with = "log_base")]
    pub bic_log: LogBase,
    pub seed: u64,
    pub formats: Vec<ReportFormat>,
    /// Use the bootstrap τ̂ with this many resamples instead of the window
    /// estimate.
    pub tau_bootstrap: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            events: None,
            grades: None,
            out: PathBuf::from("out"),
            idle_gap_minutes: 10.0,
            reset_per_session: false,
            eq_weights: (8.0, 3.0),
            bic_log: LogBase::Ten,
            seed: 42,
            formats: ReportFormat::ALL.to_vec(),
            tau_bootstrap: None,
        }
    }
}

impl RunConfig {
    pub fn idle_gap(&self) -> Result<Duration> {
        if !self.idle_gap_minutes.is_finite() || self.idle_gap_minutes <= 0.0 {
            return Err(Error::Config(format!(
                "idle gap must be a positive number of minutes, got {}",
                self.idle_gap_minutes
            )));
        }
        Ok(Duration::milliseconds(
            (self.idle_gap_minutes * 60_000.0).round() as i64,
        ))
    }

    pub fn measure_options(&self) -> Result<MeasureOptions> {
        Ok(MeasureOptions {
            eq_weights: EqWeights::new(self.eq_weights.0, self.eq_weights.1)?,
            reset_per_session: self.reset_per_session,
        })
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            tau: match self.tau_bootstrap {
                Some(resamples) => TauMethod::Bootstrap {
                    resamples,
                    seed: self.seed,
                },
                None => TauMethod::Window,
            },
            bic_base: self.bic_log,
            ..FitOptions::default()
        }
    }

    pub fn events_path(&self) -> Result<&PathBuf> {
        self.events
            .as_ref()
            .ok_or_else(|| Error::Config("an events file is required".into()))
    }

    pub fn grades_path(&self) -> Result<&PathBuf> {
        self.grades
            .as_ref()
            .ok_or_else(|| Error::Config("a grades file is required".into()))
    }
}

/// Written as "10" or "e", matching the command-line flag.
mod log_base {
    use super::LogBase;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(base: &LogBase, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match base {
            LogBase::Ten => "10",
            LogBase::E => "e",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<LogBase, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Str(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(n) => n.to_string(),
            Raw::Str(s) => s,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}
