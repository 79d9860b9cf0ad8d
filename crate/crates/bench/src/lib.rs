//! Experiment harness behind the `qentropy` binary.

pub mod config;
pub mod harness;
pub mod input;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<qentropy::Error> for HarnessError {
    fn from(e: qentropy::Error) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl HarnessError {
    /// 2 for bad input, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Validation(_) => "validation",
            HarnessError::Io(_) => "io",
        }
    }
}
