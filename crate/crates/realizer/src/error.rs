use thiserror::Error;

/// Errors surfaced by the realization library.
#[derive(Debug, Error)]
pub enum RealizeError {
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An iterative kernel ran out of its iteration budget.
    #[error("numerical failure in {what}: residual {residual:.3e} after iteration budget")]
    NumericalFailure { what: String, residual: f64 },

    #[error("rank-deficient {what}: sigma = {sigma:.3e}")]
    RankDeficient { what: String, sigma: f64 },

    /// TLS gap sigma_nx(+) - sigma_{nx+1} is below tolerance; the TLS
    /// problem is numerically insoluble.
    #[error("TLS gap below tolerance: delta = {delta:.3e}, sigma_1 = {sigma1:.3e}")]
    TlsGap { delta: f64, sigma1: f64 },

    /// The trailing left singular vector has (numerically) zero last entry,
    /// so the singular-vector ratio form has no solution.
    #[error("nongeneric TLS problem: trailing singular vector entry = {entry:.3e}")]
    TlsNongeneric { entry: f64 },

    #[error("singular weighting matrix: {0}")]
    SingularWeighting(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unstable system: spectral radius {rho}")]
    Unstable { rho: f64 },

    #[error("degenerate FIT reference: true impulse response is constant")]
    DegenerateReference,

    #[error("sampling budget exhausted after {attempts} draws")]
    SamplingBudget { attempts: usize },
}

pub type Result<T> = std::result::Result<T, RealizeError>;
