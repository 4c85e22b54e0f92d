use std::fmt;

use secmsg::aead::AeadError;
use secmsg::benchmarks::BenchError;
use secmsg::models::ModelError;
use secmsg::transport::TransportError;

/// Error carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Integrity(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Integrity(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Failure::Runtime(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
            Failure::Integrity(m) => write!(f, "integrity failure: {m}"),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        if e.is_integrity() {
            Failure::Integrity(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<TransportError> for Failure {
    fn from(e: TransportError) -> Self {
        BenchError::from(e).into()
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<AeadError> for Failure {
    fn from(e: AeadError) -> Self {
        match e {
            AeadError::Config(m) => Failure::Usage(m),
            other => Failure::Integrity(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
