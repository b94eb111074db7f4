use thiserror::Error;

/// Errors raised by the geometry, extension and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid hole shape: {0}")]
    InvalidShape(String),

    #[error("resolution too coarse: {cells_per_epsilon} cells per epsilon, need at least {minimum}")]
    ResolutionTooCoarse { cells_per_epsilon: f64, minimum: usize },

    #[error("epsilon {epsilon} is not smaller than the shortest domain side {min_side}")]
    EpsilonTooLarge { epsilon: f64, min_side: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("solid part of the perforated domain is empty")]
    EmptySolidPart,

    #[error("operation requires the {expected} variant")]
    WrongVariant { expected: &'static str },

    #[error("point at distance {distance} from the manifold is outside the tubular neighborhood (delta = {delta})")]
    OutsideTubular { distance: f64, delta: f64 },

    #[error("point lies on the singular set of the retraction (distance {distance})")]
    HitSingularSet { distance: f64 },

    #[error("inverse of the translated retraction did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("region is empty")]
    EmptyRegion,

    #[error("input field is undefined on solid cell {cell}")]
    UndefinedInput { cell: usize },

    #[error("hole {hole} has an empty collar")]
    IsolatedHole { hole: usize },

    #[error("every translation candidate was discarded by the singular-set guard")]
    NoAdmissibleTranslation,

    #[error("target manifold violates the connectivity hypotheses; enable diagnostic mode to run anyway")]
    TargetNotCovered,

    #[error("epsilon {epsilon} exceeds lambda / mu = {limit}")]
    EpsilonMarginViolation { epsilon: f64, limit: f64 },

    #[error("loop undersampled: {0}")]
    GapTooLarge(String),

    #[error("field violates the unit-length constraint by {deviation:e}")]
    ConstraintViolation { deviation: f64 },

    #[error("minimization did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
