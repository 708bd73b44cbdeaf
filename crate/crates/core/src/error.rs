use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown law `{0}`")]
    UnknownLaw(String),
    #[error("{law}: missing parameter `{field}`")]
    MissingParam { law: String, field: String },
    #[error("{law}: parameter `{field}` = {value} out of range ({expected})")]
    ParamOutOfRange {
        law: String,
        field: String,
        value: f64,
        expected: &'static str,
    },
    #[error("{what} is not available for {law}")]
    Unsupported { law: String, what: &'static str },
    #[error("argument {value} outside domain: {detail}")]
    Domain { value: f64, detail: &'static str },
    #[error("level u = {0} outside the range of the monotone map")]
    LevelOutOfRange(f64),
    #[error("bracket expansion failed to straddle u = {0}")]
    BracketExhausted(f64),
    #[error("invalid order-statistic index list: {0}")]
    InvalidIndices(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("missing moment hint for `{0}`")]
    MissingMoment(String),
    #[error("integration failed: {0}")]
    Quadrature(String),
    #[error("expansion division by a zero center")]
    ZeroCenter,
    #[error("derivative unavailable for `{0}`")]
    DerivativeUnavailable(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),
    #[error("empty evaluation grid")]
    EmptyGrid,
    #[error("negative mass {mass} at atom {atom}")]
    NegativeMass { atom: f64, mass: f64 },
    #[error("subset supremum {brute} differs from half-L1 {half_l1}")]
    ScheffeMismatch { brute: f64, half_l1: f64 },
    #[error("point {0} is an atom of the limit law")]
    AtomPoint(f64),
    #[error("no radius up to 2^60 captures the requested mass")]
    RadiusNotFound,
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario {scenario}: {detail}")]
    ScenarioParam { scenario: String, detail: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
