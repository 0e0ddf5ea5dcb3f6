//! Error types shared across the crate.

use thiserror::Error;

/// Evaluation failures of expressions at a concrete point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of non-positive argument {arg}")]
    LogDomain { arg: f64 },
    #[error("sqrt of negative argument {arg}")]
    SqrtDomain { arg: f64 },
    #[error("division by zero")]
    DivByZero,
    #[error("non-finite result (overflow or invalid operation)")]
    NonFinite,
    #[error("variable {name} not available at this evaluation point")]
    MissingVar { name: &'static str },
}

/// Parse failures carry the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at offset {offset} takes exactly one argument")]
    Arity { name: String, offset: usize },
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation at (t={t}, x={x:?}): {source}")]
    EvalAt {
        t: f64,
        x: Vec<f64>,
        source: EvalError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid field: {0}")]
    Field(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time grid misalignment: {0}")]
    TimeGrid(String),
    #[error("linear solve failed at step {step}: {msg}")]
    SolveFailure { step: usize, msg: String },
    #[error("degenerate spectral gap ({gap:.3e}); downstream computation refused")]
    DegenerateGap { gap: f64 },
    #[error("tightness level not resolvable at this truncation: defect floor {floor:.3e}")]
    NotResolvable { floor: f64 },
    #[error("test function violates its support constraint: {0}")]
    SupportViolation(String),
    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach an evaluation point to a bare evaluation error.
    pub fn eval_at(t: f64, x: &[f64], source: EvalError) -> Self {
        Error::EvalAt {
            t,
            x: x.to_vec(),
            source,
        }
    }
}
