use thiserror::Error;

/// Errors raised by the solver, the vector-field calculus and the monitors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Clifford relations violated: max deviation {violation:e} exceeds {limit:e}")]
    CliffordViolation { violation: f64, limit: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Gaussian width {sigma} must be below L/4 = {limit}")]
    WidthTooLarge { sigma: f64, limit: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("source provider has no sample at node {0}")]
    MissingSourceNode(usize),

    #[error("field norm {norm:e} exceeded the blow-up guard at t = {time}")]
    BlowUp { time: f64, norm: f64 },

    #[error("modified vector field {0} applied to a field without spinor structure")]
    ModifiedOnScalar(String),

    #[error("time jet carries {available} derivatives but {required} are required")]
    JetOrder { required: usize, available: usize },

    #[error("multi-index of length {len} exceeds K_max = {k_max}")]
    MultiIndexTooLong { len: usize, k_max: usize },

    #[error("time {0} is not a sample time of the trajectory")]
    NotASampleTime(f64),

    #[error("H is not Hermitian: max |Im(phi* H phi)| = {0:e}")]
    HermitianViolation(f64),

    #[error("Picard iteration diverged at step {step}: distances {previous:e} -> {current:e}")]
    Divergence { step: usize, previous: f64, current: f64 },

    #[error("iterate {step} has X-norm {norm:e} above the ball cap {cap:e}")]
    LeftBall { step: usize, norm: f64, cap: f64 },

    #[error("decay fit needs at least 8 samples in the window, found {0}")]
    TooFewSamples(usize),

    #[error("decay fit window must start at t >= 1, got {0}")]
    WindowStart(f64),

    #[error("nonpositive value {value:e} at t = {time}")]
    NonPositive { time: f64, value: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
