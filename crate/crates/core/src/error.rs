use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input file does not match the expected layout (e.g. a missing header column).
    #[error("format error: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Numerical data violates a precondition (non-finite values, length mismatch, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A configuration value is out of range or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// The design matrix is numerically rank deficient and no ridge term was given.
    #[error("singular design: columns {columns:?} are linearly dependent on the others")]
    Singular { columns: Vec<String> },

    /// Every candidate of a selection was rejected.
    #[error("selection error: {0}")]
    Selection(String),

    #[error("chunk {chunk_id}: {source}")]
    Chunk {
        chunk_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_chunk(self, chunk_id: &str) -> Self {
        Error::Chunk {
            chunk_id: chunk_id.to_string(),
            source: Box::new(self),
        }
    }

    /// True when the error stems from configuration rather than data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Selection(_) => true,
            Error::Chunk { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
