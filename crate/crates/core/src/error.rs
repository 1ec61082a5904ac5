use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("orthogonalization did not converge in {steps} steps (residual {residual:e})")]
    Convergence { steps: usize, residual: f64 },

    #[error("convergence precondition violated: spectral norm of QᵀQ − I is {0} (must be < 1)")]
    SpectralNorm(f64),

    #[error("householder vector {0} has zero norm")]
    ZeroReflection(usize),

    #[error("planar direction w has zero norm")]
    ZeroDirection,

    #[error("singular jacobian: determinant factor {0:e} is below the 1e-12 guard")]
    SingularJacobian(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("transformation is not invertible: {0}")]
    NonInvertible(String),

    #[error("root finder failed: {0}")]
    RootFinding(String),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence {
        epoch: usize,
        reason: String,
        trace: Vec<crate::vi::TraceRow>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
