use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An attribute index or window falls outside `1..=m`.
    #[error("range error: {0}")]
    Range(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The population oracle cannot value this query in the requested mode.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid population spec: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A bound was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible target beta' = {target}; minimal achievable beta' is {min_achievable}")]
    Infeasible { target: f64, min_achievable: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate a bad experiment description rather than
    /// a runtime failure. The CLI maps these to exit code 2.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Spec(_)
                | Error::Domain(_)
                | Error::Range(_)
                | Error::Json(_)
                | Error::Infeasible { .. }
        )
    }
}
