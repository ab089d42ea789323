use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },

    #[error("line {line}: malformed row: {msg}")]
    MalformedRow { line: usize, msg: String },

    #[error("radio {radio}: interval [{start}, {end}) is empty or inverted")]
    InvertedInterval { radio: usize, start: u64, end: u64 },

    #[error("radio {radio}: intervals [{a_start}, {a_end}) and [{b_start}, {b_end}) overlap")]
    OverlappingIntervals {
        radio: usize,
        a_start: u64,
        a_end: u64,
        b_start: u64,
        b_end: u64,
    },

    #[error("radio {radio}: interval [{start}, {end}) lies outside [0, {num_samples})")]
    IntervalOutOfRange {
        radio: usize,
        start: u64,
        end: u64,
        num_samples: u64,
    },

    #[error("unknown radio {0}")]
    UnknownRadio(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
