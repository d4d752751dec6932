use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite evaluation of the integrand at s = {s}")]
    Evaluation { s: f64 },
    #[error("degenerate derivative: F'(s) = 0 at s = {s}")]
    DegenerateDerivative { s: f64 },
    #[error("invalid splice threshold λ = {lambda}: {reason}")]
    InvalidThreshold { lambda: f64, reason: &'static str },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("value {y} is outside the invertible range")]
    Range { y: f64 },
    #[error("exterior ball violated at boundary point ({}, {}): witness ({}, {})", .x0[0], .x0[1], .witness[0], .witness[1])]
    ExteriorBallViolation { x0: [f64; 2], witness: [f64; 2] },
    #[error("geometric degeneracy: {0}")]
    GeometricDegeneracy(String),
    #[error("boundary is not a graph over a patch of half-width {half_width}")]
    PatchTooSmall { half_width: f64 },
    #[error("pole of the barrier profile at r = {r}")]
    Pole { r: f64 },
    #[error("radius {r} lies inside the excluded ball of radius {r0}")]
    Domain { r: f64, r0: f64 },
    #[error("lemma hypothesis violated: b(|x|) = {b} < M = {threshold}")]
    Precondition { b: f64, threshold: f64 },
    #[error("no termination after {iterations} iterations")]
    Nontermination { iterations: usize },
    #[error("meshing failed: {0}")]
    Meshing(String),
    #[error("solver failure at iteration {iteration}: {reason}")]
    SolverFailure { iteration: usize, reason: String },
    #[error("iteration budget of {iterations} exhausted (residual {residual:e})")]
    Budget { iterations: usize, residual: f64 },
    #[error("verification failed at stage `{stage}`: {detail}")]
    VerificationFailed { stage: &'static str, detail: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
