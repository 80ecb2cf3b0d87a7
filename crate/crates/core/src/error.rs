use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mass ratio {0} is outside (0, 0.5]")]
    InvalidMassRatio(f64),

    #[error("position ({x}, {y}, {z}) lies within {floor:e} of a primary")]
    SingularPosition { x: f64, y: f64, z: f64, floor: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("step size underflow at t = {t} (step {step:e})")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("integrator exceeded {steps} steps before reaching t = {target}")]
    StepBudgetExhausted { steps: usize, target: f64 },

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("catalog row {row}: {message}")]
    CatalogParse { row: usize, message: String },

    #[error("orbit '{id}' fails closure: max component error {error:e} exceeds {tolerance:e}")]
    ClosureViolation { id: String, error: f64, tolerance: f64 },

    #[error("unknown orbit id '{0}'")]
    UnknownOrbit(String),

    #[error("close approach: separation {rho:e} is at or below the floor {floor:e}")]
    CloseApproach { rho: f64, floor: f64 },

    #[error("measurement noise covariance is not positive definite")]
    SingularNoise,

    #[error("tensor shape mismatch: {0}")]
    Shape(String),

    #[error("control is infeasible: observer {observer} tasked {count} targets at step {step}")]
    InfeasibleControl { observer: usize, step: usize, count: usize },

    #[error("optimal objective at index {index} is not positive ({value})")]
    NonPositiveObjective { index: usize, value: f64 },

    #[error("observer {observer}: {source}")]
    Observer {
        observer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("target {target}: {source}")]
    Target {
        target: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("objective is not finite at x = {x:?}")]
    NonFiniteObjective { x: Vec<f64> },

    #[error("all {0} optimizer starts failed")]
    AllStartsFailed(usize),

    #[error("ill-conditioned covariance: condition number {0:e}")]
    IllConditioned(f64),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("schedule row {row}: {message}")]
    ScheduleParse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn for_observer(self, observer: usize) -> Self {
        Error::Observer { observer, source: Box::new(self) }
    }

    pub(crate) fn for_target(self, target: usize) -> Self {
        Error::Target { target, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
