//! Crate-wide error type.
//!
//! Errors fall into two classes that callers (notably the CLI) treat
//! differently:
//!
//! * *input errors* - malformed measures, dimension mismatches, illegal
//!   parameters; the computation was never meaningful;
//! * *numeric guards* - the request was well formed but the computation
//!   would overflow, exhaust memory, or leave the regime where the chosen
//!   algorithm is exact; [`Error::is_numeric_guard`] identifies these.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("measure has zero total mass")]
    ZeroMass,

    #[error("expected a probability vector, total mass is {sum}")]
    NotProbability { sum: f64 },

    #[error("alphabet must contain at least one color")]
    EmptyAlphabet,

    #[error("neighborhood radius must be positive, got {radius}")]
    NonPositiveRadius { radius: f64 },

    #[error("probabilities must sum to 1, got {sum}")]
    LawNotNormalized { sum: f64 },

    #[error("empty support: no atom carries positive probability")]
    EmptySupport,

    #[error("argument {value} outside [0, 1]")]
    OutOfUnitInterval { value: f64 },

    #[error("mean offspring {mean} is not supercritical (need m > 1)")]
    NotSupercritical { mean: f64 },

    #[error("Kullback action is infinite; the requested quantity is undefined")]
    InfiniteKullback,

    #[error("nu charges color {index} outside the support of mu")]
    SingularPair { index: usize },

    #[error("Kullback action must be negative for a block selection, got {rho}")]
    RateNotNegative { rho: f64 },

    #[error("theta({index}) = {value} must lie strictly inside (0, 1)")]
    ThetaOutOfRange { index: usize, value: f64 },

    #[error("empty color subset")]
    EmptySubset,

    #[error("word must be nonempty")]
    EmptyWord,

    #[error("depth must be positive")]
    ZeroDepth,

    #[error("depth {requested} exceeds available length {available}")]
    DepthBeyondLine { requested: usize, available: usize },

    #[error("depth {depth} is not a multiple of the block order {order}")]
    DepthNotDivisible { depth: usize, order: usize },

    #[error("line counts would exceed 2^{limit_log2}; reduce the depth")]
    CountOverflow { limit_log2: u32 },

    #[error("exact enumeration is infeasible for r = {r}, n = {n}; use the Monte Carlo path")]
    CombinatorialBlowup { r: usize, n: usize },

    #[error("population {population} exceeds the explicit-tree cap {cap}; reduce depth or order")]
    PopulationCap { population: usize, cap: usize },

    #[error("explicit-mode depth {depth} exceeds the cap {cap}; use histogram mode")]
    DepthCap { depth: usize, cap: usize },

    #[error("choice law vertices leave the simplex (coordinate {index})")]
    VertexOutsideSimplex { index: usize },
}

impl Error {
    /// True for errors that signal a numeric guard rather than malformed
    /// input: the computation was legal but refused to leave its exact or
    /// bounded regime.
    pub fn is_numeric_guard(&self) -> bool {
        matches!(
            self,
            Error::CountOverflow { .. }
                | Error::CombinatorialBlowup { .. }
                | Error::PopulationCap { .. }
                | Error::DepthCap { .. }
        )
    }
}
