use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A constructor parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// Tabulated or composite data failed the homeomorphism checks.
    #[error("map validation failed: {message} (offending indices: {indices:?})")]
    Validation { message: String, indices: Vec<usize> },

    #[error("degenerate map: chord between nodes {i} and {j} vanishes (run validate() for diagnostics)")]
    DegenerateMap { i: usize, j: usize },

    #[error("degenerate map: minimum slope {min_slope:e} below {threshold:e} (run validate() for diagnostics)")]
    SlopeTooSmall { min_slope: f64, threshold: f64 },

    #[error("degenerate quadruple: points {0} and {1} coincide")]
    DegenerateQuadruple(usize, usize),

    #[error("integrand not integrable: {0}")]
    NonIntegrable(String),

    #[error("integral did not converge: {0}")]
    NonConvergent(String),

    #[error("bilipschitz certificate failed: sampled constant {sampled} exceeds claimed {claimed}")]
    BilipschitzCertificate { sampled: f64, claimed: f64 },

    #[error("Douglas sum diverges: {0}")]
    InfiniteEnergy(String),

    #[error("parse error at position {pos}: {message}\n  {input}\n  {caret}")]
    Parse {
        pos: usize,
        message: String,
        input: String,
        caret: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(input: &str, pos: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            pos,
            message: message.into(),
            input: input.to_string(),
            caret: format!("{}^", " ".repeat(pos)),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
