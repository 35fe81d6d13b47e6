use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("permutation has length {found}, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("item {item} appears more than once")]
    DuplicateItem { item: u32 },
    #[error("item {item} is outside 1..={n}")]
    OutOfRangeItem { item: u32, n: usize },
    #[error("constraint item {item} is outside 1..={n}")]
    ItemOutOfRange { item: u32, n: usize },
    #[error("constraint must hold at least two items")]
    ConstraintTooShort,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no candidate constraint with non-zero gradient")]
    NoViableCandidate,
    #[error("constraint already contains every item")]
    SaturatedConstraint,
    #[error("constraint {0} is already part of the model")]
    DuplicateConstraint(String),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("empty input")]
    Empty,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("datasets disagree on item count")]
    IncompatibleDatasets,
    #[error("unknown node {0}")]
    UnknownNode(u64),
    #[error("node {0} is inactive")]
    NodeInactive(u64),
    #[error("node {0} is active")]
    NodeActive(u64),
    #[error("model has no active constraints")]
    EmptyModel,
    #[error("iteration {index} out of range (history has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("session already finalized")]
    AlreadyFinalized,
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("target {0} is not finite")]
    NonFiniteTarget(f64),
    #[error("need {needed} rows, dataset has {available}")]
    InsufficientRows { needed: usize, available: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_line(self, line: usize) -> Error {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }

    /// Machine-readable error code. Line-annotated errors report the code of
    /// the underlying error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::WrongLength { .. } => "WrongLength",
            Error::DuplicateItem { .. } => "DuplicateItem",
            Error::OutOfRangeItem { .. } => "OutOfRangeItem",
            Error::ItemOutOfRange { .. } => "ItemOutOfRange",
            Error::ConstraintTooShort => "ConstraintTooShort",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NoViableCandidate => "NoViableCandidate",
            Error::SaturatedConstraint => "SaturatedConstraint",
            Error::DuplicateConstraint(_) => "DuplicateConstraint",
            Error::EmptyDataset => "EmptyDataset",
            Error::Empty => "Empty",
            Error::InvalidHyperparams(_) => "InvalidHyperparams",
            Error::IncompatibleDatasets => "IncompatibleDatasets",
            Error::UnknownNode(_) => "UnknownNode",
            Error::NodeInactive(_) => "NodeInactive",
            Error::NodeActive(_) => "NodeActive",
            Error::EmptyModel => "EmptyModel",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::AlreadyFinalized => "AlreadyFinalized",
            Error::AtLine { source, .. } => source.code(),
            Error::Malformed(_) => "Malformed",
            Error::NonFiniteTarget(_) => "NonFiniteTarget",
            Error::InsufficientRows { .. } => "InsufficientRows",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Io(_) => "IoError",
            Error::Json(_) => "Malformed",
        }
    }

    /// Strips line annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. } => source.root(),
            e => e,
        }
    }
}
