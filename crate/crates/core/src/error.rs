use thiserror::Error;

/// Errors raised by the polar subcode toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular")]
    Singular,

    #[error("matrix has rank {rank} but {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot draw {requested} distinct permutations from a group of order {order}")]
    GroupExhausted { requested: usize, order: u128 },

    #[error("relaxation self-check failed: R * G_relaxed != G_N")]
    RelaxationInconsistent,

    #[error("non-finite channel LLR at position {0}")]
    NonFiniteLlr(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
