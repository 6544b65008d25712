use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("spectral operations need a power-of-two periodic grid, got {points} points")]
    NotSpectral { points: usize },

    #[error("wavefunction is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("wavefunction vanishes identically")]
    ZeroWavefunction,

    #[error("every grid point is a node")]
    AllNodes,

    #[error("operation requires a {expected}-dimensional grid, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("phase step dt·max|V|/ħ = {ratio:.3} exceeds 1")]
    PhaseStepTooLarge { ratio: f64 },

    #[error("non-finite value produced at t = {time}")]
    NonFinite { time: f64 },

    #[error("launch point x = {x} lies on the node mask")]
    LaunchOnNode { x: f64 },

    #[error("position x = {x} is outside the grid box")]
    OutsideGrid { x: f64 },

    #[error("history does not cover t = {time}")]
    HistoryGap { time: f64 },

    #[error("{flagged} of {count} paths were flagged or aborted (limit 1%)")]
    TooManyFlagged { flagged: usize, count: usize },

    #[error("excluded node measure {measure:.3e} exceeds 1% of the norm")]
    NodeMeasure { measure: f64 },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("moment order {0} is not supported (max 4)")]
    MomentOrder(usize),

    #[error("uncertainty bound violated: {0}")]
    BoundViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
