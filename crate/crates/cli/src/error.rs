use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("--{key}: {msg}")]
    Config { key: String, msg: String },

    #[error("numeric failure: {0}")]
    Numeric(#[from] actinfo::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Config { key: key.into(), msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Numeric(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}
