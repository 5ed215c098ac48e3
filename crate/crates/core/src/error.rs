use thiserror::Error;

use crate::numerics::NumericsError;
use crate::spectral::ConfigViolation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("exponent {exponent:.3} of seed {seed} exceeds overflow guard at (x, t) = ({x}, {t})")]
    Overflow { seed: usize, exponent: f64, x: f64, t: f64 },
    #[error("singular point at (x, t) = ({x}, {t}){}", level.map(|l| format!(" at Darboux level {l}")).unwrap_or_default())]
    Singular { x: f64, t: f64, level: Option<usize> },
    #[error("degenerate parameter: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
