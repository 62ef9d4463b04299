use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{strategy} supports at most {max} users, got {k}")]
    UnsupportedK {
        strategy: &'static str,
        k: usize,
        max: usize,
    },

    #[error("invalid user groups: {0}")]
    InvalidGroups(String),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("stream {stream} is not in the decode chain of user {user}")]
    NotInChain { user: usize, stream: usize },

    #[error("order enumeration for {strategy} with {k} users exceeds the combinatorial limit")]
    CombinatorialLimit { strategy: &'static str, k: usize },

    #[error("allocation on stream {stream} exceeds its common rate by {excess:.3e} bit/s/Hz")]
    AllocOverflow { stream: usize, excess: f64 },

    #[error("QoS constraints are infeasible for this block")]
    QosInfeasible,

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("need at least 3 uniformly spaced SNR points for a slope fit, got {0}")]
    InsufficientPoints(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
