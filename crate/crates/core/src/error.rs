use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),
    #[error("invalid record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("unknown utterance id {0:?}")]
    UnknownId(String),
    #[error("missing embedding for {0:?}")]
    MissingEmbedding(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("non-finite value in embedding {0:?}")]
    NonFinite(String),
    #[error("zero-norm vector ({0})")]
    ZeroNorm(String),
    #[error("record {0:?} has no speaker label")]
    Unlabelled(String),
    #[error("insufficient {what}: need {needed}, have {available}")]
    Insufficient {
        what: String,
        needed: usize,
        available: usize,
    },
    #[error("eligible pool {pool} < K={k} for target {target:?}")]
    EligiblePool {
        target: String,
        pool: usize,
        k: usize,
    },
    #[error("training needs at least two speakers, found {0}")]
    SingleClass(usize),
    #[error("trial list needs both target and nontarget trials")]
    SingleClassTrials,
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
