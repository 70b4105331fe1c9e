use thiserror::Error;

/// Source position of a DSL error, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {loc}: {msg}")]
    Syntax { loc: Location, msg: String },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("cycle detected through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("exogenous node `{0}` has an incoming edge")]
    ExogenousIncoming(String),
    #[error("invalid node `{id}`: {msg}")]
    InvalidNode { id: String, msg: String },
    #[error("`{0}` is not a treatment node")]
    NotTreatment(String),
    #[error("invalid difference: {0}")]
    InvalidDifference(String),
    #[error("duplicate difference node `{0}`")]
    DuplicateDifference(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("graph too large for exhaustive enumeration ({nodes} nodes, limit {limit})")]
    TooLarge { nodes: usize, limit: usize },
    #[error("restrictions not satisfied: {0}")]
    Restrictions(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("estimation failed: {0}")]
    Estimate(String),
    #[error("I/O: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI and the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::DuplicateNode(_) => "duplicate_node",
            Error::DuplicateEdge(..) => "duplicate_edge",
            Error::SelfLoop(_) => "self_loop",
            Error::UnknownNode(_) => "unknown_node",
            Error::Cycle(_) => "cycle",
            Error::ExogenousIncoming(_) => "exogenous_incoming",
            Error::InvalidNode { .. } => "invalid_node",
            Error::NotTreatment(_) => "not_treatment",
            Error::InvalidDifference(_) => "invalid_difference",
            Error::DuplicateDifference(_) => "duplicate_difference",
            Error::InvalidQuery(_) => "invalid_query",
            Error::TooLarge { .. } => "too_large",
            Error::Restrictions(_) => "restrictions",
            Error::InvalidTarget(_) => "invalid_target",
            Error::Config(_) => "config",
            Error::Estimate(_) => "estimate",
            Error::Io(_) => "io",
        }
    }

    pub fn location(&self) -> Option<Location> {
        match self {
            Error::Syntax { loc, .. } => Some(*loc),
            _ => None,
        }
    }

    pub(crate) fn syntax(line: usize, column: usize, msg: impl Into<String>) -> Self {
        Error::Syntax { loc: Location { line, column }, msg: msg.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
