use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-physical parameter `{field}` = {value}")]
    NonPhysicalParameter { field: &'static str, value: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("operation requires the {expected} second-layer environment")]
    VariantMismatch { expected: &'static str },

    #[error("invalid qubit state: {0}")]
    InvalidState(String),

    #[error("no crossover of `{parameter}` in [{lo}, {hi}]: both ends are {label}")]
    NoCrossoverInBracket {
        parameter: String,
        lo: f64,
        hi: f64,
        label: String,
    },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPhysicalParameter { .. } => "NonPhysicalParameter",
            Error::InvalidSolverConfig(_) => "InvalidSolverConfig",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::VariantMismatch { .. } => "VariantMismatch",
            Error::InvalidState(_) => "InvalidState",
            Error::NoCrossoverInBracket { .. } => "NoCrossoverInBracket",
            Error::InvalidSweep(_) => "InvalidSweep",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
