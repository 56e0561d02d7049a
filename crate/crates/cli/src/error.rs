use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    #[error("config: {0}")]
    Config(String),

    /// A field rejected by the numerical modules at validation time.
    #[error("{field}: {source}")]
    Invalid {
        field: String,
        #[source]
        source: entropy_lab::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(#[from] entropy_lab::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid { .. } => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
        }
    }

    pub fn config(field: &str, message: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {message}"))
    }
}

/// Tags validation errors from the library with the config field they came from.
pub trait FieldContext<T> {
    fn field(self, field: &str) -> Result<T, CliError>;
}

impl<T> FieldContext<T> for entropy_lab::Result<T> {
    fn field(self, field: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Invalid { field: field.to_string(), source })
    }
}
