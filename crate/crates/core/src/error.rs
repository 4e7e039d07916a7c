use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("series operands have different variable registries")]
    RegistryMismatch,
    #[error("series operands have different truncations")]
    TruncationMismatch,
    #[error("exp of a series with nonzero constant term")]
    NonzeroConstantTerm,
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("duplicate variable: {0}")]
    DuplicateVariable(String),
    #[error("variable {0} has odd grading {1}")]
    OddGrading(String, i64),
    #[error("monomial {0:?} lies outside the truncation")]
    OutsideTruncation(Vec<u32>),
    #[error("monomial has {got} exponents, registry has {expected} variables")]
    ArityMismatch { expected: usize, got: usize },
    #[error("basis index {0} out of range")]
    BasisIndex(usize),
    #[error("unstable moduli space: n = {n}, degree = {degree}")]
    Unstable { n: usize, degree: u32 },
    #[error("class e_{0} is not a divisor class")]
    NotDivisor(usize),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid correlator: {0}")]
    InvalidCorrelator(String),
    #[error("relation not applicable: {0}")]
    NotApplicable(String),
    #[error("reconstruction failed: {0}")]
    Reconstruction(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
