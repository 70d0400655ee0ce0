use thiserror::Error;

/// Failures of the sparse linear algebra layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("singular system (rank deficit at least {rank_deficit})")]
    Singular { rank_deficit: usize },
    #[error("solver breakdown, final relative residual {residual:e}")]
    Breakdown { residual: f64 },
    #[error("internal solver error: {0}")]
    Internal(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("obstacle touches or crosses the cell boundary")]
    ObstacleTouchesBoundary,
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("resolution {0} too coarse: no element layer separates the obstacle from the cell boundary")]
    ResolutionTooCoarse(usize),
    #[error("1/epsilon is not an integer (epsilon = {0})")]
    NonIntegerTiling(f64),
    #[error("incompatible constraints: {0}")]
    IncompatibleConstraints(String),
    #[error("spaces live on different meshes")]
    MeshMismatch,
    #[error("solver breakdown, final relative residual {0:e}")]
    SolverBreakdown(f64),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("zero denominator: field has no divergence or rotation")]
    ZeroDenominator,
    #[error("well-posedness condition violated: gamma^2 = {gamma_sq:e} >= bound = {bound:e}")]
    WellPosednessViolated { gamma_sq: f64, bound: f64 },
    #[error("inconsistent cell solutions: {0}")]
    InconsistentSolutions(String),
    #[error("viscosities and coupling constants must be positive")]
    NonPositiveViscosity,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eigenvalue solver failed: {0}")]
    EigSolverFailure(String),
    #[error("degenerate mesh: inf-sup constant {0:e} below 1e-10")]
    DegenerateMesh(f64),
    #[error("symmetric part of K1 is not positive definite (min eigenvalue {0:e})")]
    IndefiniteTensor(f64),
    #[error("need at least two solutions with distinct epsilon")]
    TooFewSamples,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SolverError> for Error {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Singular { .. } => Error::SingularSystem(e.to_string()),
            SolverError::Breakdown { residual } => Error::SolverBreakdown(residual),
            other => Error::SingularSystem(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
