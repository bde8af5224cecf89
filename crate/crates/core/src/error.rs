use thiserror::Error;

use crate::kernel::State;

/// Errors raised while evaluating expressions at a state.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("index {index} out of bounds for array `{array}` of length {len}")]
    IndexOutOfBounds {
        array: String,
        index: String,
        len: usize,
    },
    #[error("kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("array `{array}` has length {expected}, assigned a literal of length {found}")]
    ArrayLength {
        array: String,
        expected: usize,
        found: usize,
    },
    #[error("inf - inf is undefined")]
    MonusOfInfinities,
    #[error("division by zero")]
    DivByZero,
    #[error("empty uniform range [{lo}..{hi}]")]
    EmptyUniformRange { lo: String, hi: String },
    #[error("negative run-time value {0}")]
    Negative(String),
    #[error("expected a natural number, got {0}")]
    NotNatural(String),
    #[error("`n` used outside an omega-invariant")]
    OmegaUnbound,
    #[error("`cont` used where no continuation is available")]
    UnboundContinuation,
    #[error("probability mass of distribution is {0}, expected 1")]
    ProbabilityMass(String),
    #[error("state {0} is outside the tabulated domain")]
    OutsideTable(State),
    #[error("{0}")]
    Other(String),
}

/// Crate-level error.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Syntax(#[from] crate::lang::parser::SyntaxError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("evaluation budget of {0} exceeded")]
    BudgetExceeded(u64),
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(u64),
    #[error("program is not deterministic: {0}")]
    NotDeterministic(String),
    #[error("MDP exceeds node cap of {0}")]
    NodeCapExceeded(usize),
    #[error("singular linear system")]
    SingularSystem,
    #[error("refinement precondition fails at {state} in round {round}")]
    PreconditionFailed { state: State, round: usize },
    #[error("no loop at {0}")]
    NoSuchLoop(String),
    #[error("{0}")]
    Spec(String),
    #[error("at state {state}: {source}")]
    AtState { state: State, source: Box<Error> },
}

impl Error {
    pub fn at(self, state: &State) -> Error {
        match self {
            e @ Error::AtState { .. } => e,
            e => Error::AtState {
                state: state.clone(),
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
