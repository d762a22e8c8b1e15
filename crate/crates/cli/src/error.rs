use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or out-of-range configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Module(#[from] hilbert_ops::Error),

    #[error("trajectory diverged at step {step}: |x| = {magnitude:e} exceeds 1e6")]
    Divergence { step: usize, magnitude: f64 },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// `2` for configuration problems, `1` for everything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// The message collapsed onto one line.
    pub fn diagnostic(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
