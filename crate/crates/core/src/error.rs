use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector lengths do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A chain state became non-finite.  The step size must be reduced.
    #[error("chain diverged (non-finite state) at step {step}{}",
        chain.map(|c| format!(" in chain {c}")).unwrap_or_default())]
    Diverged { step: u64, chain: Option<usize> },

    /// An adaptive quadrature did not reach its tolerance.
    #[error("quadrature did not converge after {doublings} doublings (last change {last_change:e})")]
    QuadratureNoConvergence { doublings: u32, last_change: f64 },

    /// A self-normalized posterior integral underflowed.
    #[error("posterior normalizer underflow for observation {observation}")]
    NormalizerUnderflow { observation: usize },

    /// A configuration value violates an invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
