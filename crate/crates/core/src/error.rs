use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("node {id} out of range for n = {n}")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("request {{{0}, {0}}} is a self-loop")]
    SelfLoop(usize),

    #[error("star needs at least {min} nodes, got {n}")]
    TooFewNodes { n: usize, min: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("request delivered out of order: expected index {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("policy does not match sequence: {0}")]
    PolicyMismatch(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("search budget exceeded: {needed} trajectories > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl Error {
    /// Process exit code for the CLI: 1 validation, 2 invariant, 3 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            Error::BudgetExceeded { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
