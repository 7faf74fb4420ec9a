use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("truncation D = {0} is too small (need D >= 2)")]
    TruncationTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("inadequate grid: {0}")]
    InadequateGrid(String),

    #[error("frame is not matched to the oscillator (sigma = {sigma}, ladder width = {ladder})")]
    UnmatchedFrame { sigma: f64, ladder: f64 },

    #[error("input state is mixed; the phase-space generator is only established for pure states")]
    MixedState,

    #[error("outside the trusted truncation region: {0}")]
    Truncation(String),

    #[error("rank deficient: rank {rank} < required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },

    #[error("too few cells: {got} < {required}")]
    TooFewCells { got: usize, required: usize },

    #[error("cell lies outside the grid")]
    CellOutsideGrid,

    #[error("bin configuration: {0}")]
    Bins(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PhaseError>;
