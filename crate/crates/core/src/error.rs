use thiserror::Error;

pub type Result<T, E = HcfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HcfError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for complex dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("metric is not Hermitian at point {point} (defect {defect:.3e})")]
    NonHermitian { point: usize, defect: f64 },

    #[error("metric is singular or indefinite at point {point} (smallest eigenvalue {min_eigenvalue:.6e})")]
    SingularMetric { point: usize, min_eigenvalue: f64 },

    #[error("non-positive metric determinant at point {point} ({det:.6e})")]
    NonPositiveDeterminant { point: usize, det: f64 },

    #[error("metric lost positivity at t = {t} (point {point}, eigenvalue {min_eigenvalue:.6e})")]
    PositivityLoss {
        t: f64,
        point: usize,
        min_eigenvalue: f64,
    },

    #[error("non-finite values appeared at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow: curvature rule asks for dt = {requested:.3e} < min_dt = {min_dt:.3e}")]
    StepUnderflow { requested: f64, min_dt: f64 },

    #[error("heat solution lost positivity (min {min:.3e}); dt too large for the scheme")]
    HeatPositivity { min: f64 },

    #[error("heat scheme is not monotone for this metric at point {point}")]
    NotMonotone { point: usize },

    #[error("heat field is not synchronized with the flow state (phi at t = {phi_t}, state at t = {state_t})")]
    Unsynchronized { phi_t: f64, state_t: f64 },

    #[error("trajectory too short: {have} states, need at least {need}")]
    InsufficientTrajectory { have: usize, need: usize },

    #[error("trajectory has no state at t = {t}")]
    MissingBracketingState { t: f64 },

    #[error("curvature package is stale (package t = {package_t}, state t = {state_t})")]
    StalePackage { package_t: f64, state_t: f64 },

    #[error("probe target has no symbolic derivative")]
    MissingSymbolicDerivative,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HcfError {
    /// Errors that end a flow run as a numerical outcome rather than a fault.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HcfError::SingularMetric { .. }
                | HcfError::NonPositiveDeterminant { .. }
                | HcfError::PositivityLoss { .. }
                | HcfError::NonFinite { .. }
                | HcfError::StepUnderflow { .. }
                | HcfError::HeatPositivity { .. }
                | HcfError::NotMonotone { .. }
        )
    }
}
