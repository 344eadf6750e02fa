use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    Domain { point: Vec<f64> },

    #[error("metric is singular or not positive definite at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("point {point:?} is the projection pole of the chart")]
    PoleSingularity { point: Vec<f64> },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    Convergence { iterations: usize, estimate: f64 },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("trajectory left the chart domain at t = {time}")]
    DomainExit { time: f64, position: Vec<f64> },

    #[error("non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::SingularMetric { .. } => "singular_metric",
            Error::PoleSingularity { .. } => "pole_singularity",
            Error::Schedule(_) => "schedule",
            Error::Parameter(_) => "parameter",
            Error::Convergence { .. } => "convergence",
            Error::Solver { .. } => "solver",
            Error::DomainExit { .. } => "domain_exit",
            Error::BlowUp { .. } => "blow_up",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parameter(_) | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
