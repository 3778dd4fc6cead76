//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the selection and inference pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A column is constant, so unit-norm scaling is undefined.
    #[error("column {0} has zero variance after centering; cannot normalize")]
    ZeroVarianceColumn(usize),

    /// The requested submatrix is rank deficient beyond tolerance.
    #[error("design submatrix is numerically singular (rank tolerance {tol:e})")]
    SingularDesign { tol: f64 },

    /// Coordinate descent ran out of iterations before the gap target.
    #[error("lasso did not converge in {iters} iterations (duality gap {gap:e})")]
    DidNotConverge {
        iters: usize,
        gap: f64,
        /// Last iterate, so callers can inspect or warm-start.
        beta: Vec<f64>,
    },

    /// Enumerating 2^m sign patterns would exceed the configured cap.
    #[error("active set of size {m} needs 2^{m} sign patterns, above the cap {cap}")]
    TooManySignPatterns { m: usize, cap: usize },

    /// Every remaining candidate column lies in the span of the selected ones.
    #[error("all remaining candidates are collinear with the selected columns at step {step}")]
    CollinearCandidate { step: usize },

    /// All LARS candidate knot values are negative; the path cannot continue.
    #[error("no feasible LARS entry at step {step}: all candidate knots negative")]
    NoFeasibleEntry { step: usize },

    /// The c-vector denominator vanished for this (variable, sign) pair.
    #[error("degenerate c-vector denominator for variable {j} with sign {s}")]
    DegenerateDenominator { j: usize, s: i8 },

    /// The observation violates the polyhedron it was supposed to define.
    #[error("observation violates the polyhedron by {violation:e} (row {row})")]
    InfeasibleAtObservation { row: usize, violation: f64 },

    /// No sign-pattern polyhedron contributes a feasible interval.
    #[error("no feasible component in the union of polyhedra")]
    NoFeasibleComponent,

    /// The selection procedure failed while scanning the line.
    #[error("selector failed during line search: {0}")]
    SelectorFailure(String),

    /// The truncated mass underflows even via the log-space tail path.
    #[error("truncated Gaussian mass underflows in log space")]
    DegenerateMass,

    /// No sign change found while expanding the bracket in the mean.
    #[error(
        "no bracket for mu within {span} standard deviations of x={x} \
         (f at ends: {f_lo}, {f_hi}, target {target})"
    )]
    BracketFailure {
        x: f64,
        span: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },

    /// The observed statistic lies outside the truncation region.
    #[error("statistic {stat} lies outside the truncation region")]
    OutsideRegion { stat: f64 },

    /// The path step does not nest the previous active set.
    #[error("active sets are not nested between steps {prev} and {cur}")]
    ModelNotNested { prev: usize, cur: usize },

    /// The simplified spacing test needs the next knot, which does not exist.
    #[error("step {k} is the last knot; the simplified spacing test needs lambda_{}", k + 1)]
    MissingNextKnot { k: usize },

    /// CSV cell could not be parsed as a number.
    #[error("non-numeric cell at line {line}, column {column}: {content:?}")]
    NonNumericCell {
        line: usize,
        column: usize,
        content: String,
    },

    /// Structural CSV problem (ragged row, empty file, ...).
    #[error("CSV parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },

    /// The named response column is missing from the header.
    #[error("response column {0:?} not found in CSV header")]
    MissingResponse(String),

    /// Configuration rejected before running anything.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// I/O failure, stringified to keep the error type cloneable.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
