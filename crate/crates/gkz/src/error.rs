use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A scenario or argument violates a rule; `path` locates it in the document.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("evaluation failed: {0}")]
    Evaluation(#[from] gkz_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}
