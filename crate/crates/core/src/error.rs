//! Crate-wide error type.

/// Errors surfaced by samplers, estimators and calibration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input that must be finite was NaN or infinite.
    #[error("non-finite input: {what}")]
    NonFinite { what: &'static str },

    /// A point or index had the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An argument violated a documented precondition.
    #[error("invalid argument: {what}")]
    InvalidArg { what: String },

    /// The target/proposal density ratio exceeded the stored rejection bound.
    /// The sampler fails loudly rather than silently truncating the ratio.
    #[error("calibration breach for n={n}: ratio {ratio} > bound {bound} at x={x}")]
    CalibrationBreach { n: usize, x: f64, ratio: f64, bound: f64 },

    /// A rejection loop consumed an implausible number of proposals; the
    /// calibration table is almost certainly wrong for this target.
    #[error("rejection sampler for n={n} made {proposals} proposals without progress")]
    LowAcceptance { n: usize, proposals: u64 },

    /// Numerical degeneracy that survived the jitter/restart policy.
    #[error("numerical degeneracy: {what}")]
    Degenerate { what: String },

    /// Linear-algebra failure (Cholesky/QR) that jitter escalation did not fix.
    #[error("numerical failure: {what}")]
    Numerical { what: String },

    /// The direction x/|x| is undefined at the origin.
    #[error("singular input: direction of the zero vector is undefined")]
    SingularInput,
}

pub type Result<T> = std::result::Result<T, Error>;
