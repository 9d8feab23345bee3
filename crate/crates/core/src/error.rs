use thiserror::Error;

/// Errors raised by the analytic models, the tour solvers and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The zone queue has no steady state (utilization at or above one).
    #[error("unstable system: utilization {rho:.6} >= 1")]
    Unstable { rho: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// No (K, n) cell of the search grid passed the feasibility filters.
    #[error("no feasible design in search grid (minimum utilization found: {min_rho:.6})")]
    NoFeasibleDesign { min_rho: f64 },

    /// Exhaustive search refused for this many nodes.
    #[error("exact tour search refused for {0} nodes (limit {limit})", limit = crate::tsp::EXACT_NODE_LIMIT)]
    TooManyNodes(usize),

    /// Broken simulator bookkeeping; never expected in a correct build.
    #[error("internal logic error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
