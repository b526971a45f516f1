use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("angular momentum domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {needed} atoms, got {got}")]
    TooFewAtoms { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step {dt} s does not divide the interval of {interval} s before the next event")]
    NonCommensurateStep { interval: f64, dt: f64 },
    #[error("hop proposal probability {0} exceeds 1 (need 8 t dt <= 1)")]
    HopProbability(f64),
    #[error("exact diagonalization supports at most {max} atoms, got {n}")]
    SizeGuard { n: usize, max: usize },
    #[error("cloud regions overlap")]
    OverlappingRegions,
    #[error("degenerate SQL estimate: {0}")]
    DegenerateSql(String),
    #[error("cloud label {0} missing from shots")]
    MissingLabel(char),
    #[error("insufficient data: need {needed}, got {got} ({what})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("every shot was removed by the atom-number filter")]
    AllShotsFiltered,
}
