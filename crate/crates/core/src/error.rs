use thiserror::Error;

/// Errors raised by the library. Each variant maps to one CLI exit code class.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("numeric error at step {step}: {message}")]
    Numeric { step: usize, message: String },
    #[error("rejection budget exhausted after {attempts} attempts (acceptance rate {rate:.3e})")]
    RejectionBudget { attempts: u64, rate: f64 },
    #[error("weight degeneracy in {component}: {message}")]
    Degeneracy { component: String, message: String },
    #[error("starvation in {component}: {message}")]
    Starvation { component: String, message: String },
    #[error("argument error: {0}")]
    Argument(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn degeneracy(component: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Degeneracy { component: component.into(), message: message.into() }
    }

    pub fn starvation(component: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Starvation { component: component.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
