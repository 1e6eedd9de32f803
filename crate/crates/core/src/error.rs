use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the geometry, problem and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("matrix is rank deficient (|R[{index},{index}]| = {value:e})")]
    RankDeficient { index: usize, value: f64 },
    #[error("point or tangent violates manifold constraints: {0}")]
    NotOnManifold(String),
    #[error("points are antipodal; the sphere logarithm is undefined")]
    AntipodalPoints,
    #[error("normal equations are numerically singular")]
    SingularSystem,
    #[error("Sinkhorn scaling did not converge (marginal error {residual:e} after {iterations} iterations)")]
    SinkhornNotConverged { residual: f64, iterations: usize },
    #[error("coupling has non-positive entries")]
    NotPositiveEntries,
    #[error("logarithm map is not available on the {0} manifold")]
    LogUnavailable(&'static str),
    #[error("exponential map is not available on the {0} manifold")]
    ExpUnavailable(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("problem does not expose per-sample oracles")]
    NoSampleOracle,
    #[error("problem does not provide an analytic Hessian-vector product")]
    AnalyticHvpUnavailable,
    #[error("search direction is not a descent direction (slope {slope:e})")]
    NotDescentDirection { slope: f64 },
    #[error("line search failed after {evaluations} evaluations")]
    LineSearchFailed { evaluations: usize },
    #[error("trust-region subproblem produced a non-finite iterate")]
    SubproblemBreakdown,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
