use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input value {value} at channel {channel} is outside [0, 1]")]
    InputRange { channel: usize, value: f64 },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("empty trial: rate requires at least one timestep")]
    EmptyTrial,

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("trace too short: need at least {needed} steps, got {got}")]
    TraceTooShort { needed: usize, got: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
