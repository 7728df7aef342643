use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed input document. `field` names the offending JSON path.
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    /// An exhaustive search would exceed its configured budget.
    #[error("budget exceeded: {what} needs {needed}, budget allows {allowed}")]
    Budget {
        what: String,
        needed: u128,
        allowed: u128,
    },

    /// An internal proof obligation of a construction failed.
    #[error("construction failed at round {round}: {message}")]
    Construction { round: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn budget(what: impl Into<String>, needed: u128, allowed: u128) -> Self {
        Error::Budget {
            what: what.into(),
            needed,
            allowed,
        }
    }
}
