use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alpha must be non-integer: {value} is within {guard} of the integer {nearest} (the expansion requires alpha outside the natural numbers)")]
    IntegerAlpha { value: f64, nearest: u64, guard: f64 },

    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("Frobenius index {index} is within {guard} of 1; the closed-form pair degenerates")]
    DegenerateIndex { index: f64, guard: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("harmonic part must vanish at the origin, got psi(0) = {0:e}")]
    HarmonicOffset(f64),

    #[error("step size underflow at t = {t} (h = {h:e}); coefficient is singular here")]
    StepUnderflow { t: f64, h: f64 },

    #[error("too many integration steps ({steps}) before reaching t = {target}")]
    StepLimit { steps: usize, target: f64 },

    #[error("weight function is not positive at r = {r} (value {value})")]
    NonPositiveWeight { r: f64, value: f64 },

    #[error("ODE residual {residual:e} exceeds bound {bound:e} at r = {r}")]
    ResidualCheck { residual: f64, bound: f64, r: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (estimated error {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("integral tail beyond {cutoff} is too large ({tail:e} > {tolerance:e}); forcing decays too slowly")]
    SlowTail { cutoff: f64, tail: f64, tolerance: f64 },

    #[error("near-resonant fundamental pair: normalized Wronskian {0:e}")]
    Resonance(f64),

    #[error("forcing violates the required envelope: {0}")]
    EnvelopeViolation(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("maximizer stuck at bracket endpoint {0}")]
    BracketEndpoint(f64),

    #[error("non-finite value {what} at {location}")]
    NonFinite { what: String, location: String },

    #[error("coincident points in Green's function evaluation")]
    CoincidentPoints,

    #[error("shooting failed for u0 = {u0}: {source}")]
    Family { u0: f64, source: Box<Error> },

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
