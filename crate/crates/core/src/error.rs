use std::fmt;

use thiserror::Error;

/// Position of a diagnostic inside an input text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub col: usize,
}

impl SourceSpan {
    pub fn new(file: &str, line: usize, col: usize) -> Self {
        SourceSpan { file: file.to_string(), line: line.max(1), col: col.max(1) }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{span}: syntax error: {msg}")]
    Syntax { span: SourceSpan, msg: String },

    #[error("{span}: unsafe rule: variable {var} is never bound")]
    Unsafe { span: SourceSpan, var: String },

    #[error("{span}: unknown strategy `{name}`")]
    UnknownStrategy { span: SourceSpan, name: String },

    #[error("{span}: unknown annotation function `{name}/{arity}`")]
    UnknownFunction { span: SourceSpan, name: String, arity: usize },

    #[error("{span}: {msg}")]
    Invalid { span: SourceSpan, msg: String },

    #[error("incoherent result for {call}: object {object} occurs in two random variables")]
    Incoherent { call: String, object: String },

    #[error("invalid random variable: {0}")]
    InvalidRv(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("unbound variable {0}")]
    Unbound(String),

    #[error("unknown action {0}")]
    UnknownAction(String),

    #[error("conflicting effects: {atom} is added by one action and deleted by another")]
    ConcConflict { atom: String },

    #[error("product of {size} compatible states exceeds the cap of {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("ground atom universe of {size} exceeds the bound of {bound}")]
    BoundExceeded { size: usize, bound: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("invalid structure: {0}")]
    Structure(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("no consistent set exists")]
    NoConsistentSet { witness: String },

    #[error("no reasonable set exists")]
    NoReasonableSet { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Semantic failure sentinels, as opposed to input errors.
    pub fn is_sentinel(&self) -> bool {
        matches!(self, Error::NoConsistentSet { .. } | Error::NoReasonableSet { .. })
    }

    /// Explanation attached to a sentinel.
    pub fn detail(&self) -> Option<&str> {
        match self {
            Error::NoConsistentSet { witness } => Some(witness),
            Error::NoReasonableSet { reason } => Some(reason),
            _ => None,
        }
    }

    pub fn span(&self) -> Option<&SourceSpan> {
        match self {
            Error::Syntax { span, .. }
            | Error::Unsafe { span, .. }
            | Error::UnknownStrategy { span, .. }
            | Error::UnknownFunction { span, .. }
            | Error::Invalid { span, .. } => Some(span),
            _ => None,
        }
    }
}
