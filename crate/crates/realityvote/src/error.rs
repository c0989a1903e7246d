use thiserror::Error;

/// Every failure the library reports. The CLI maps variants onto exit codes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("profile has no voters")]
    EmptyProfile,
    #[error("ballot does not match the domain: {0}")]
    MixedBallotKind(String),
    #[error("profile has no active honest voter (sigma + mu = 1)")]
    NoActiveHonest,
    #[error("sybil voter without a ballot")]
    SybilWithoutBallot,
    #[error("active honest voter without a ballot")]
    ActiveWithoutBallot,
    #[error("sybils are always active; a passive sybil is not allowed")]
    PassiveSybil,
    #[error("target set is empty")]
    EmptyTargetSet,
    #[error("rule needs full rankings but got a single-choice ballot")]
    NonRankingBallot,
    #[error("no visible ballots and no status-quo mass")]
    EmptyElectorate,
    #[error("mechanism does not fit the domain: {0}")]
    IncompatibleMechanism(String),
    #[error("weighted median over an empty list")]
    EmptyEntries,
    #[error("no proxy available for a passive voter")]
    NoProxyAvailable,
    #[error("sample of {requested} exceeds {available} honest voters")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("passive honest voters need private ballots here")]
    MissingPrivateBallots,
    #[error("shape is not realizable with integer counts: {0}")]
    UnrealizableShape(String),
    #[error("parameters are outside the theorem's violating regime: {0}")]
    RegimeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
