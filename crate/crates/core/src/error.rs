use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by the zero expression")]
    ZeroDenominator,
    #[error("negative decay rate {0}")]
    NegativeRate(String),
    #[error("scale coefficient must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("bubbles `{0}` and `{1}` are equivalent")]
    Equivalent(String, String),
    #[error("bubble `{0}` is not on top of the root")]
    NotOnTopOfRoot(String),
    #[error("bubble `{0}` sits directly on top of several incomparable bubbles")]
    AmbiguousParent(String),
    #[error("unknown bubble `{0}`")]
    UnknownBubble(String),
    #[error("child `{0}` escapes to infinity relative to its parent scale")]
    InfiniteConcentration(String),
    #[error("concentration point {0} lies outside the unit disk")]
    ConcentrationOutsideUnitDisk(f64),
    #[error("degenerate group: {0}")]
    Degenerate(String),
    #[error("containment fails at leading order: {0}")]
    Containment(String),
    #[error("point hits a pole or excluded center")]
    Pole,
    #[error("point outside the domain: {0}")]
    OutsideDomain(String),
    #[error("piece kind mismatch: expected {0}")]
    KindMismatch(&'static str),
    #[error("parameter out of range: {0}")]
    ParameterDomain(String),
    #[error("profile does not cover the requested range: {0}")]
    Coverage(String),
    #[error("resolution too coarse: {0}")]
    TooCoarse(String),
    #[error("configuration not valid at index t = {t}: {reason}")]
    NotValidAtIndex { t: f64, reason: String },
    #[error("config syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("config field `{field}`: {msg}")]
    Schema { field: String, msg: String },
    #[error("family assumption violated: {0}")]
    Assumption(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
