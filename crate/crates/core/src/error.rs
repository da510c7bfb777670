use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("program has {got} relations but the hypothesis has {expected} chunks")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{m} hypothesis chunks exceed the enumeration cap of {cap}")]
    CapExceeded { m: usize, cap: usize },

    #[error("cannot chunk an empty sentence")]
    EmptySentence,

    #[error("step {t} is outside 1..={m}")]
    StepOutOfRange { t: usize, m: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary does not cover `{0}`")]
    Vocabulary(String),

    #[error("invalid dataset request: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable kind, used by the CLI's error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::EmptySentence => "empty_sentence",
            Error::StepOutOfRange { .. } => "step_out_of_range",
            Error::NonFinite(_) => "non_finite",
            Error::Lexicon(_) => "lexicon",
            Error::Config(_) => "config",
            Error::Vocabulary(_) => "vocabulary",
            Error::Generation(_) => "generation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
