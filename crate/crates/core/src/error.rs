use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value violates its documented range.
    InvalidParameter(String),
    /// A path is malformed (empty, discontinuous, zero-length segment).
    InvalidPath(String),
    /// Belief network structure or CPT problem.
    InvalidNetwork(String),
    /// Evidence has zero probability under the network.
    InconsistentEvidence,
    /// A reward fed to the Q-update was NaN or infinite.
    NonFiniteReward(f64),
    /// Action index outside the action set.
    UnknownAction(usize),
    UnknownCase(String),
    EmptyCorpus,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidPath(msg) => write!(f, "invalid path: {msg}"),
            Error::InvalidNetwork(msg) => write!(f, "invalid belief network: {msg}"),
            Error::InconsistentEvidence => f.write_str("inconsistent evidence: observation has zero probability"),
            Error::NonFiniteReward(r) => write!(f, "non-finite reward {r}"),
            Error::UnknownAction(i) => write!(f, "action index {i} is outside the action set"),
            Error::UnknownCase(id) => write!(f, "unknown case id {id:?}"),
            Error::EmptyCorpus => f.write_str("training corpus is empty"),
        }
    }
}

impl core::error::Error for Error {}
