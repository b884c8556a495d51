use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("automaton rejects the input tree (root state {0})")]
    Rejected(String),
    #[error("digest collision between distinct type serializations (digest {0})")]
    Collision(String),
    #[error("table file: {0}")]
    Table(String),
    #[error("at node {address}: {source}")]
    AtNode {
        address: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }

    /// True when the root cause is a budget overflow.
    pub fn is_budget(&self) -> bool {
        match self {
            Error::Budget(_) => true,
            Error::AtNode { source, .. } => source.is_budget(),
            _ => false,
        }
    }

    /// True for errors caused by malformed user input.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Syntax { .. }
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::Table(_)
            | Error::Io(_) => true,
            Error::AtNode { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
