use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("request log is empty")]
    EmptyLog,

    #[error("requested top {requested} {what} but the log only has {available}")]
    Shortfall {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("user {0} has zero total play count")]
    ZeroActivityUser(String),

    #[error("missing feature vectors: {0}")]
    MissingFeatures(&'static str),

    #[error("feature dimension mismatch: contents have K={contents}, users have K={users}")]
    FeatureDimension { contents: usize, users: usize },

    #[error("user {user}: candidate subset is nonempty but carries zero inherent probability")]
    DegenerateCandidates { user: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("all content popularities are zero")]
    ZeroPopularity,

    #[error("bisection failed to bracket the multiplier: residual({lo:e}) = {res_lo}, residual({hi:e}) = {res_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        res_lo: f64,
        res_hi: f64,
    },

    #[error("user {user}: potential set exhausted with {have} of {need} recommendations")]
    PotentialSetExhausted { user: usize, have: usize, need: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
