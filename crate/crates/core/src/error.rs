use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("modular parameter {0} must have positive imaginary part")]
    InvalidModulus(Complex64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: argument {at} lies too close to a lattice point")]
    SingularArgument { what: String, at: Complex64 },
    #[error("{0}: non-finite input")]
    NonFinite(&'static str),
    #[error("non-finite sample on the contour at {0}")]
    NonFiniteSample(Complex64),
    #[error("unsupported algebra {family}{rank}")]
    UnsupportedAlgebra { family: String, rank: usize },
    #[error("outer automorphism of order {order} is not available for {family}{rank}")]
    UnsupportedOrder { family: String, rank: usize, order: u32 },
    #[error("no matrix realization for {0}; only lattice data is available")]
    MatrixRealizationUnavailable(String),
    #[error("invalid marks: {0}")]
    InvalidMarks(String),
    #[error("lattice is not a sublattice: {0}")]
    NotASublattice(String),
    #[error("alcove reduction did not converge after {0} steps")]
    NonConvergence(usize),
    #[error("moment constraint not applied: Cartan spin component {label} = {value}")]
    ConstraintNotApplied { label: String, value: Complex64 },
    #[error("observable is not differentiable at the stencil: {0}")]
    NonDifferentiable(String),
    #[error("trajectory hit a singularity at step {step}: {reason}")]
    SingularityHit { step: usize, reason: String },
    #[error("invalid slot pair ({0}, {1})")]
    InvalidSlot(usize, usize),
    #[error("test section produced a non-finite value")]
    NonFiniteSection,
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
