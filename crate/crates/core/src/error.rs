use alloc::string::String;
use core::fmt;

use num_complex::Complex64;

/// Everything that can go wrong while building a system or evaluating a
/// period function.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A factor was declared without monomials.
    EmptySupport { factor: usize },
    /// The same exponent vector appears twice in one factor.
    DuplicateMonomial { factor: usize },
    /// Structural problem with a scenario (dimensions, exponents, kinds).
    InvalidScenario(String),
    /// Structural problem with a cycle description.
    InvalidCycle(String),
    /// A tracked factor or twisted coordinate vanishes on the integration path.
    PathThroughSingularity { location: Complex64, what: String },
    /// Adaptive bisection could not keep the log increments below π/2.
    UnresolvableBranch { location: Complex64 },
    /// The integrand overflowed or produced NaN.
    NonFinite { location: Complex64 },
    /// A ray never reached the decay threshold.
    NonDecayingRay { direction: Complex64 },
    /// Quadrature hit its level cap before meeting the tolerance.
    Unconverged { value: Complex64, error_estimate: f64 },
    /// Root continuation failed to converge, typically close to the discriminant.
    NearDiscriminant { location: Complex64 },
    /// The leading coefficient vanished along the continuation path.
    RootEscape,
    /// A non-integer power of a root lying on the principal branch cut.
    BranchAmbiguity { root: Complex64 },
    /// Differentiation order beyond the supported cap.
    OrderTooHigh { order: usize, cap: usize },
    /// A coefficient vector of the wrong length was supplied.
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptySupport { factor } => write!(f, "empty support in factor {}", factor),
            Error::DuplicateMonomial { factor } => write!(f, "duplicate monomial in factor {}", factor),
            Error::InvalidScenario(msg) => write!(f, "invalid scenario: {}", msg),
            Error::InvalidCycle(msg) => write!(f, "invalid cycle: {}", msg),
            Error::PathThroughSingularity { location, what } => {
                write!(f, "path passes through a zero of {} near {}", what, location)
            }
            Error::UnresolvableBranch { location } => {
                write!(f, "branch could not be resolved near {}", location)
            }
            Error::NonFinite { location } => write!(f, "non-finite integrand at {}", location),
            Error::NonDecayingRay { direction } => {
                write!(f, "integrand does not decay along ray direction {}", direction)
            }
            Error::Unconverged { value, error_estimate } => {
                write!(f, "quadrature did not converge (value {}, error estimate {:e})", value, error_estimate)
            }
            Error::NearDiscriminant { location } => {
                write!(f, "root continuation failed near the discriminant at root {}", location)
            }
            Error::RootEscape => write!(f, "leading coefficient vanished along the continuation path"),
            Error::BranchAmbiguity { root } => {
                write!(f, "root {} lies on the branch cut of the twist", root)
            }
            Error::OrderTooHigh { order, cap } => {
                write!(f, "derivative order {} exceeds the cap {}", order, cap)
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {} coefficients, found {}", expected, found)
            }
        }
    }
}

impl core::error::Error for Error {}
