use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("point {coords:?} lies outside the valid region of chart {chart}")]
    ChartDomain { coords: [f64; 2], chart: &'static str },

    #[error("trajectory blew up at t = {time} (|xi| = {norm})")]
    Blowup { time: f64, norm: f64 },

    #[error("integrator step size underflow at t = {time}")]
    StepTooSmall { time: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("degenerate critical point at {0:?}")]
    Degenerate([f64; 2]),

    #[error("transversality lost: {0}")]
    Transversality(String),

    #[error("state is not on the extremal locus: {0}")]
    NotOnLocus(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("newton iteration diverged at q = {q:?} (residual {residual})")]
    NewtonDivergence { q: [f64; 2], residual: f64 },

    #[error("synthesis did not converge: {0}")]
    NoConvergence(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
