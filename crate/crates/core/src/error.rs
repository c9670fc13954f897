use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid jet: {0}")]
    InvalidJet(String),

    #[error("jet fails the convexity/flatness conditions: {0}")]
    ConditionsViolated(String),

    #[error("gradient-difference span Y is not contained in X (residual {residual:.3e})")]
    YNotInX { residual: f64 },

    #[error("gradient is constant: only the affine extension exists and X must be {{0}} (dim X = {dim_x})")]
    ConstantGradient { dim_x: usize },

    #[error("corner function is affine (constant slopes)")]
    AffineCorner,

    #[error("subspace does not match the span of slope differences (projector gap {gap:.3e})")]
    SubspaceMismatch { gap: f64 },

    #[error("slope components orthogonal to the subspace are not constant (spread {spread:.3e})")]
    NonConstantOrthogonalPart { spread: f64 },

    #[error("|v| = {v_norm} is not strictly below L = {lipschitz}")]
    LinearPartTooLarge { v_norm: f64, lipschitz: f64 },

    #[error("function is not coercive in its subspace: {0}")]
    NotCoercive(String),

    #[error("slope differences are linearly dependent (rank {rank} < {expected})")]
    DependentSlopes { rank: usize, expected: usize },

    #[error("coercivity minorant audit failed: worst slack {worst:.3e}")]
    MinorantAudit { worst: f64 },

    #[error("C^{{1,1}} curvature undefined: pair ({i}, {j}) has residual {residual:.3e} but gradient gap {gap:.3e}")]
    CurvatureUndefined { i: usize, j: usize, residual: f64, gap: f64 },

    #[error("envelope solver did not converge: gap bound {gap:.3e} after {iterations} iterations")]
    SolverNonConvergence { gap: f64, iterations: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Unreadable or malformed input, as opposed to data that fails the
    /// mathematical requirements.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Json(_) | Error::Parse(_) | Error::InvalidJet(_) | Error::NonFinite(_) | Error::DimensionMismatch { .. }
        )
    }
}
