use thiserror::Error;

/// Error type shared across the crate.
///
/// Hypothesis checks deliberately do *not* use this type: they return a
/// structured report (pass/fail per hypothesis) so that a failing measure can
/// still be inspected. `HypothesisViolation` is only raised by operations
/// whose preconditions require the hypotheses to hold (e.g. energy
/// evaluation).
#[derive(Debug, Error)]
pub enum FracError {
    #[error("no interior lattice node fits in the domain (need at least 2)")]
    EmptyDomain,
    #[error("functions live on different domains")]
    DomainMismatch,
    #[error("{0}")]
    OutOfRange(String),
    #[error("degenerate critical exponent: N - s*p = {0} <= 0")]
    DegenerateExponent(f64),
    #[error("two distinct grid nodes coincide (grid corruption): indices {0} and {1}")]
    SingularPair(usize, usize),
    #[error("probe function has vanishing reference seminorm")]
    DegenerateProbe,
    #[error("measure hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("operation requires a measure without negative part")]
    NegativePartPresent,
    #[error("probe has zero positive-part energy; reprobe with a different seed")]
    ZeroPositiveMass,
    #[error("mountain-pass path collapsed: maximal energy along the path fell to {0} <= 0")]
    CollapsedPath(f64),
}

pub type Result<T> = std::result::Result<T, FracError>;
