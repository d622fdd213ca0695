use std::fmt;

/// One residual that exceeded its limit in the invariant harness.
#[derive(Debug, Clone, PartialEq)]
pub struct Breach {
    pub check: &'static str,
    pub residual: f64,
    pub limit: f64,
}

impl fmt::Display for Breach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (residual {:e}, limit {:e})", self.check, self.residual, self.limit)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("tolerance breach: {}", list(.0))]
    ToleranceBreach(Vec<Breach>),
    #[error(transparent)]
    Model(#[from] chemostat_dde_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn list(breaches: &[Breach]) -> String {
    breaches.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub(crate) fn invalid(key: &str, message: impl Into<String>) -> Self {
        CliError::InvalidValue {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
