use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid damping parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("chart {chart} is not valid for gamma = {gamma}")]
    ChartMismatch { chart: &'static str, gamma: f64 },

    #[error("unknown chart name '{0}'")]
    UnknownChart(String),

    #[error("equilibrium search failed: {0}")]
    Equilibrium(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("power-law fit rejected: {0}")]
    Fit(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported matrix dimension {0} (expected 2 or 3)")]
    Dimension(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
