use thiserror::Error;

/// A support conflict between two actions at one ordered state pair:
/// `p[i][j](with_support) > 0` while `p[i][j](without_support) == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SupportConflict {
    pub from: usize,
    pub to: usize,
    pub with_support: usize,
    pub without_support: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RmdpError {
    #[error("instance needs at least 2 states, got {0}")]
    TooFewStates(usize),

    #[error("instance needs at least 2 actions, got {0}")]
    TooFewActions(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {state} of kernel {action} sums to {sum}")]
    RowNotStochastic { action: usize, state: usize, sum: f64 },

    #[error("entry ({state}, {target}) of kernel {action} is {value}")]
    NegativeEntry {
        action: usize,
        state: usize,
        target: usize,
        value: f64,
    },

    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("state {state} is absorbing under action {action} (p_ii = 1)")]
    AbsorbingState { action: usize, state: usize },

    #[error("policy row {state} is not a probability vector (sum {sum})")]
    InvalidPolicy { state: usize, sum: f64 },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("transition matrix is not irreducible")]
    NotIrreducible,

    #[error("transition matrix is not reversible (max detailed-balance gap {gap:e} at ({i}, {j}))")]
    NotReversible { i: usize, j: usize, gap: f64 },

    #[error("{count} deterministic policies exceed the enumeration cap {cap}")]
    ExplosionGuard { count: u128, cap: u64 },

    #[error("off-diagonal support differs across actions at {} pair(s)", .0.len())]
    SupportMismatch(Vec<SupportConflict>),

    #[error("support is not symmetric: p[{from}][{to}] > 0 but p[{to}][{from}] = 0 for every action")]
    AsymmetricSupport { from: usize, to: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("canonical graph is not biconnected")]
    NotBiconnected,

    #[error("canonical graph is not a tree")]
    NotTree,

    #[error(
        "transition ratio at ({state}, {target}) differs between actions {action} and {reference}: {value} vs {reference_value}"
    )]
    RatioMismatch {
        state: usize,
        target: usize,
        action: usize,
        reference: usize,
        value: f64,
        reference_value: f64,
    },

    #[error("not a reversible MDP: {0}")]
    NotRmdp(String),

    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("policy iteration revisited a policy after {steps} steps")]
    CycleDetected { steps: usize },

    #[error("linear solve failed: {0}")]
    SingularSolve(String),

    #[error("matrix factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("covariance is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("local-time level must be positive, got {0}")]
    InvalidLevel(f64),

    #[error("consistency check failed: {0}")]
    Inconsistent(String),

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl RmdpError {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        use RmdpError::*;
        match self {
            TooFewStates(_) => "TooFewStates",
            TooFewActions(_) => "TooFewActions",
            DimensionMismatch(_) => "DimensionMismatch",
            RowNotStochastic { .. } => "RowNotStochastic",
            NegativeEntry { .. } => "NegativeEntry",
            NonFinite { .. } => "NonFinite",
            AbsorbingState { .. } => "AbsorbingState",
            InvalidPolicy { .. } => "InvalidPolicy",
            UnknownLabel(_) => "UnknownLabel",
            NotIrreducible => "NotIrreducible",
            NotReversible { .. } => "NotReversible",
            ExplosionGuard { .. } => "ExplosionGuard",
            SupportMismatch(_) => "SupportMismatch",
            AsymmetricSupport { .. } => "AsymmetricSupport",
            Disconnected => "Disconnected",
            InvalidGraph(_) => "InvalidGraph",
            NotBiconnected => "NotBiconnected",
            NotTree => "NotTree",
            RatioMismatch { .. } => "RatioMismatch",
            NotRmdp(_) => "NotRmdp",
            InvalidFactorization(_) => "InvalidFactorization",
            InvalidConfig(_) => "InvalidConfig",
            CycleDetected { .. } => "CycleDetected",
            SingularSolve(_) => "SingularSolve",
            FactorizationFailure(_) => "FactorizationFailure",
            NotPsd(_) => "NotPsd",
            InvalidLevel(_) => "InvalidLevel",
            Inconsistent(_) => "Inconsistent",
            Malformed(_) => "Malformed",
        }
    }

    /// True for errors that mean the input itself is malformed, as opposed
    /// to a well-formed input that fails a domain property.
    pub fn is_input_error(&self) -> bool {
        use RmdpError::*;
        matches!(
            self,
            TooFewStates(_)
                | TooFewActions(_)
                | DimensionMismatch(_)
                | RowNotStochastic { .. }
                | NegativeEntry { .. }
                | NonFinite { .. }
                | AbsorbingState { .. }
                | InvalidPolicy { .. }
                | UnknownLabel(_)
                | InvalidGraph(_)
                | InvalidConfig(_)
                | InvalidLevel(_)
                | Malformed(_)
        )
    }
}

pub type Result<T, E = RmdpError> = std::result::Result<T, E>;
