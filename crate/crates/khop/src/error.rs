//! Error taxonomy shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector that must have positive norm is (numerically) zero.
    #[error("vector at index {index} has zero norm")]
    ZeroVector { index: usize },

    /// Shapes of two operands disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An idx file does not start with the expected magic number.
    #[error("bad idx magic number: expected 0x{expected:08x}, got 0x{got:08x}")]
    BadMagic { expected: u32, got: u32 },

    /// An idx file ended before the declared payload.
    #[error("truncated file: needed {needed} bytes, found {got}")]
    TruncatedFile { needed: usize, got: usize },

    /// A selection (pattern subset, image range, ...) came out empty.
    #[error("empty selection")]
    EmptySelection,

    /// A NaN or infinity showed up where a finite value is required.
    #[error("non-finite value encountered")]
    NonFinite,

    /// Bisection did not reach its tolerance within the iteration cap.
    #[error("bisection did not converge within {max_iters} iterations")]
    BisectionNoConverge { max_iters: usize },

    /// An image with all-zero pixels cannot be normalized.
    #[error("image {index} is all zeros")]
    ZeroImage { index: usize },

    /// The operation needs at least two stored patterns.
    #[error("operation requires at least two patterns")]
    SinglePattern,

    /// The operation needs at least two code points.
    #[error("operation requires at least two points")]
    SinglePoint,

    /// An index exceeds the valid range.
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// A scalar argument lies outside the mathematical domain of the function.
    #[error("argument {value} outside domain ({domain})")]
    OutOfDomain { value: f64, domain: &'static str },

    /// A logarithm would be taken of a non-positive number.
    #[error("logarithm argument {value} is not positive")]
    InvalidLogArgument { value: f64 },

    /// The separation radius is zero, so radius-dependent bounds degenerate.
    #[error("degenerate separation radius (zero)")]
    DegenerateRadius,

    /// A matrix that must have positive Frobenius norm is (numerically) zero.
    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    /// A weight vector fails the probability-simplex check.
    #[error("weights do not lie on the probability simplex")]
    NotOnSimplex,

    /// Grid-based maps are only defined over two-dimensional pattern spaces.
    #[error("operation requires d = 2, got d = {d}")]
    NotPlanar { d: usize },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed configuration file or value.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
