use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("invalid vertex: {0}")]
    InvalidVertex(String),
    #[error("loop query on {0}")]
    LoopQuery(String),
    #[error("U and V are not disjoint: {0}")]
    DisjointnessViolated(String),
    #[error("backend exhausted after {0} vertices")]
    ExhaustedBackend(usize),
    #[error("invalid letter: {0}")]
    InvalidLetter(String),
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("not found within window: {0}")]
    NotFound(String),
    #[error("empty graph")]
    EmptyGraph,
    #[error("finite group rejected: {0}")]
    FiniteGroupRejected(String),
    #[error("invalid partial isomorphism: {0}")]
    InvalidPartialIso(String),
    #[error("equivariance violated: {0}")]
    EquivarianceViolated(String),
    #[error("freeness violated: {0}")]
    FreenessViolated(String),
    #[error("singular action detected: {0}")]
    SingularActionDetected(String),
    #[error("commit conflict: {0}")]
    CommitConflict(String),
    #[error("index too small: {0}")]
    IndexTooSmall(String),
    #[error("not reduced: {0}")]
    NotReduced(String),
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("disconnection failure: {0}")]
    DisconnectionFailure(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("parse error at {line}:{col}: {msg}")]
    ParseError { line: usize, col: usize, msg: String },
    #[error("validation error in `{field}`: {msg}")]
    ValidationError { field: String, msg: String },
    #[error("unknown suite: {0}")]
    UnknownSuite(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExhausted(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
