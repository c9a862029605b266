use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The document is not valid JSON or does not fit the expected shape.
    #[error("malformed document at `{path}`: {message}")]
    Json { path: String, message: String },

    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u32 },

    #[error("unknown model family {0:?}")]
    UnknownFamily(String),

    /// A shape or invariant violation, naming the offending path.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error("feature {index} value {value} is outside its {bit_width}-bit domain")]
    FeatureDomain {
        index: usize,
        value: u64,
        bit_width: u32,
    },

    #[error("operation not available for family `{family}`: {message}")]
    WrongFamily { family: String, message: String },

    #[error("variant `{variant}` not supported for family `{family}`")]
    UnsupportedVariant { family: String, variant: String },

    /// A configured resource budget would be exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("invalid program: {0}")]
    Program(String),

    #[error("simulation error: {0}")]
    Simulation(String),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget(_))
    }
}
