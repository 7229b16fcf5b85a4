use thiserror::Error;

#[derive(Debug, Error)]
pub enum ComplexError {
    #[error("rank {0} is not active in the complex")]
    InactiveRank(usize),
    #[error("lower rank {lower} must be strictly below upper rank {upper}")]
    RankOrder { lower: usize, upper: usize },
    #[error("adjacency needs two distinct ranks, got {0} twice")]
    SameRank(usize),
    #[error("rank path must be nonempty and strictly increasing, got {0:?}")]
    InvalidPath(Vec<usize>),
    #[error("cell at rank {rank} is empty")]
    EmptyCell { rank: usize },
    #[error("vertex {vertex} out of range for {vertex_count} vertices")]
    VertexOutOfRange { vertex: usize, vertex_count: usize },
    #[error("cell {cell:?} listed twice at rank {rank}")]
    DuplicateCell { rank: usize, cell: Vec<usize> },
    #[error("permutation for rank {rank} is not a bijection on 0..{len}")]
    InvalidPermutation { rank: usize, len: usize },
    #[error("complex violates its invariants: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot build complex: {0}")]
    Construction(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{source_name}:{line}: {message}")]
    Line {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
