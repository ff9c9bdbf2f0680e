use serde::{Deserialize, Serialize};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Ten,
    E,
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "10" => Ok(LogBase::Ten),
            "e" | "E" => Ok(LogBase::E),
            other => Err(format!("log base must be 10 or e, got `{other}`")),
        }
    }
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Ten => v.log10(),
            LogBase::E => v.ln(),
        }
    }
}

/// BIC′ = n·log(1 − R²) + p·log(n). More negative is better.
pub fn bic_prime(n: usize, r2: f64, p: usize, base: LogBase) -> Result<f64, FitError> {
    if !(0.0..1.0).contains(&r2) || n == 0 {
        return Err(FitError::BicDomain { n, r2 });
    }
    Ok(n as f64 * base.log(1.0 - r2) + p as f64 * base.log(n as f64))
}
