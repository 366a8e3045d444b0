use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-positive gap {gap} m passed to a car-following model")]
    NonPositiveGap { gap: f64 },

    #[error("metric window [{start}, {end}) s is not covered by the log (ends at {log_end} s)")]
    WindowOutsideLog { start: f64, end: f64, log_end: f64 },

    #[error("log has no failure event")]
    NoFailureEvent,

    #[error("statistical test undefined: {0}")]
    UndefinedTest(String),

    #[error("malformed session log: {0}")]
    MalformedLog(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
