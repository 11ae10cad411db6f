use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("field is not strictly positive (sampled value {value} at x={x}, theta={theta})")]
    NonPositiveField { value: f64, x: f64, theta: f64 },

    #[error("eigen iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shift {shift} is not strictly above the spectrum")]
    SingularShift { shift: f64 },

    #[error("principal eigenvector has a non-positive entry at node {index}; refine the grid")]
    NotPositive { index: usize },

    #[error("Rayleigh quotient needs a self-adjoint operator (lambda = {lambda})")]
    NotSymmetric { lambda: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("population does not persist (principal eigenvalue {k0})")]
    NotPersistent { k0: f64 },

    #[error("speed undefined: {0}")]
    UndefinedSpeed(String),

    #[error("simulation blew up at t={t} (max u = {max_u})")]
    BlowUp { t: f64, max_u: f64 },

    #[error("time step {dt} exceeds the reaction stability bound {bound}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("front reached the right edge of the domain at t={t} (x = {x}); extend the domain")]
    FrontEscaped { t: f64, x: f64 },

    #[error("density is below the front threshold everywhere")]
    NoFront,
}

pub type Result<T> = std::result::Result<T, Error>;
