use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("node {0} has exactly one child")]
    OneChild(i64),

    #[error("duplicate node id {0}")]
    DuplicateId(i64),

    #[error("unknown node {0}")]
    UnknownNode(i64),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("letter {0} outside the automaton alphabet")]
    LetterOutOfRange(u32),

    #[error("instance too large for brute force: {0}")]
    TooLarge(String),

    #[error("automaton with {states} states exceeds the lift cap of {cap}")]
    LiftCap { states: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("forest requirement violated: {0}")]
    Forest(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("enumeration is stale: the index was updated since it was opened")]
    Stale,

    #[error("unknown name {0:?}")]
    UnknownName(String),

    #[error("no node is selected, the average is undefined")]
    EmptySelection,

    #[error("expected {expected} parameter nodes, got {got}")]
    Arity { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
