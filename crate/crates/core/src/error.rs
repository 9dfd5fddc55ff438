use thiserror::Error;

use crate::termspace::TermSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse term `{token}`: {reason}")]
    TermParse { token: String, reason: String },

    #[error("line {line}: {message}")]
    CircuitParse { line: usize, message: String },

    #[error("q-matrix file, line {line}: {message}")]
    QMatrixFormat { line: usize, message: String },

    #[error("statevector has no amplitude above {tol:e}")]
    InvalidStateVector { tol: f64 },

    #[error("parameters give the zero vector for family {family}")]
    DegenerateParameters { family: String },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("class {class}: condition `{predicate}` is not satisfied")]
    ConditionViolated { class: String, predicate: String },

    #[error("no policy information at state {{{state}}}")]
    NoPolicy { state: TermSet },

    #[error("greedy walk revisited state {{{state}}}")]
    LoopDetected { state: TermSet },

    #[error("step budget of {steps} exhausted before reaching the objective")]
    BudgetExceeded { steps: usize },

    #[error("term-set {{{state}}} is not part of the environment")]
    NotInEnvironment { state: TermSet },

    #[error("support mismatch: expected {{{expected}}}, got {{{found}}}")]
    SupportMismatch { expected: TermSet, found: TermSet },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no angle assignment found (best residual {residual:e})")]
    NoSolution { residual: f64 },

    #[error("catalog data: {0}")]
    Catalog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
