use crate::expr::{EvalError, ParseError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("derivations have different symbols")]
    SymbolMismatch,
    #[error("derivations live over different base domains")]
    BaseMismatch,
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("trajectory left the domain at time {escape_time:.10e} before reaching {target:.10e}")]
    Escaped { escape_time: f64, target: f64 },
    #[error("step size underflow at time {time:.6e} (step {step:.3e}); problem may be stiff")]
    StepUnderflow { time: f64, step: f64 },
    #[error("maximum number of steps ({steps}) exceeded at time {time:.6e}")]
    MaxSteps { steps: usize, time: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is ill-conditioned (condition estimate {condition:.3e} > {bound:.1e})")]
    IllConditioned { condition: f64, bound: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition `{check}` failed: {detail}")]
    Precondition { check: String, detail: String },
    #[error("scene {kind} error at {location}: {message}")]
    Scene { kind: SceneErrorKind, location: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

/// What went wrong while loading a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneErrorKind {
    /// Malformed document or unknown/missing keys.
    Syntax,
    /// An expression failed to parse.
    Expression,
    /// A name refers to nothing declared.
    Resolution,
    /// Shapes or dimensions disagree.
    Dimension,
    /// Well-formed but mathematically invalid data.
    Invalid,
}

impl std::fmt::Display for SceneErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneErrorKind::Syntax => "syntax",
            SceneErrorKind::Expression => "expression",
            SceneErrorKind::Resolution => "resolution",
            SceneErrorKind::Dimension => "dimension",
            SceneErrorKind::Invalid => "validation",
        })
    }
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: scene, expression or usage.
    Usage,
    /// A certification precondition did not hold.
    Verification,
    /// Escape, conditioning, or stiffness failures during integration.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Escaped { .. }
            | Error::StepUnderflow { .. }
            | Error::MaxSteps { .. }
            | Error::Singular
            | Error::IllConditioned { .. }
            | Error::Eval(_) => ErrorClass::Numerical,
            Error::Precondition { .. } => ErrorClass::Verification,
            _ => ErrorClass::Usage,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
