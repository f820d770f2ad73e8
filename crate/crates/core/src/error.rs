use thiserror::Error;

/// Errors produced across the synthesis, realization and compatibility pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error("delay must be at least one timestep (undelayed LQR is not handled here)")]
    ZeroDelay,

    #[error("Riccati iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("Riccati pivot B'PB = {pivot:e} is singular")]
    SingularPivot { pivot: f64 },

    #[error("degenerate controller: K0 = 0")]
    DegenerateController,

    #[error("the zero transfer function has no relative degree")]
    ZeroFunction,

    #[error("denominator is identically zero")]
    ZeroDenominator,

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("expected {expected}, got a transfer function with numerator degree {num} and denominator degree {den}")]
    WrongForm {
        expected: &'static str,
        num: usize,
        den: usize,
    },

    #[error("matrix is singular (|det| = {det:e})")]
    SingularTransform { det: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("similarity transform produced a structural zero at {entry}; retry with a different transform")]
    StructuralZero { entry: String },

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("signal `{0}` has no vertex assignment")]
    Unassigned(String),

    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("assignment pins `{signal}` to v{got}, expected v{expected}")]
    PinViolation {
        signal: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("delay-free cycle through `{0}`")]
    AlgebraicLoop(String),

    #[error("unknown neuron `{0}`")]
    UnknownNeuron(String),

    #[error("controller relative degree {got} is below the required {required}")]
    InsufficientDelay { got: usize, required: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
