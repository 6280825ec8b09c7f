use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {level} out of range for a {levels}-level grid")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("dose grid needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("dose values must be strictly increasing")]
    NonIncreasingDoses,
    #[error("toxicity probabilities are not strictly increasing at level {0}")]
    NonMonotone(usize),
    #[error("value {value} at position {position} is outside (0, 1)")]
    OutOfRange { position: usize, value: f64 },
    #[error("levels {0} and {1} are equidistant from the target")]
    TieForMtd(usize, usize),
    #[error("invalid target probability {0}")]
    InvalidTarget(f64),
    #[error("invalid cohort: {dlts} DLTs out of {size}")]
    InvalidCounts { size: u32, dlts: u32 },
    #[error("expected cohort size {expected}, found {found}")]
    CohortSizeMismatch { expected: u32, found: u32 },
    #[error("design requires one patient per cohort, found {0}")]
    NonUnitCohort(u32),
    #[error("no cohorts recorded yet")]
    EmptyHistory,
    #[error("no observations at any level")]
    NoObservations,
    #[error("no observations at the current level {0}")]
    NoDataAtLevel(usize),
    #[error("malformed history: {0}")]
    MalformedHistory(String),
    #[error("model parameter must be positive, got {0}")]
    NonPositiveTheta(f64),
    #[error("degenerate skeleton: {0}")]
    DegenerateSkeleton(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("x values must be strictly increasing")]
    NonIncreasingX,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scenario generator starved after {attempts} attempts")]
    GeneratorStarved { attempts: u64 },
    #[error("calibration infeasible: {0}")]
    Infeasible(String),
    #[error("threshold stream exhausted: needed {needed}, have {available}")]
    StreamExhausted { needed: usize, available: usize },
    #[error("empty ensemble")]
    EmptyEnsemble,
}
