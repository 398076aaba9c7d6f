use alloc::string::String;
use core::fmt;

/// Errors surfaced by the slope calculus.
///
/// Indeterminacy is never silently absorbed: whenever a certificate cannot
/// support the requested conclusion, the operation fails with
/// `PrecisionInsufficient` rather than guessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// The working window or the attached certificates cannot support the
    /// requested computation.
    PrecisionInsufficient(String),
    /// An element failed a unit test required by its ring.
    NotAUnit(String),
    /// Zero input where a nonzero element is required.
    ZeroInput,
    /// Malformed input (dimension mismatch, bad tag, invalid parameter).
    InvalidInput(String),
    /// Polygon comparison on polygons of different ranks.
    RankMismatch { left: usize, right: usize },
    /// The splitting iteration hit a pair of diagonal entries with equal
    /// valuations; solving it would need residue-field arithmetic that the
    /// coefficient field does not support.
    UnsupportedResidueSolve { row: usize, col: usize },
    /// A fiber outside the classes for which a special polygon is computable.
    UnsupportedFiber(String),
    /// The cyclic-vector candidate list was exhausted.
    CyclicVectorNotFound,
    /// A search completed without finding a certified result.
    SearchExhausted(String),
    /// An internal invariant that the underlying theory guarantees was
    /// violated; this indicates a bug or exhausted precision mislabelled as
    /// exact.
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::PrecisionInsufficient(msg) => write!(f, "precision insufficient: {msg}"),
            Error::NotAUnit(msg) => write!(f, "not a unit: {msg}"),
            Error::ZeroInput => write!(f, "zero input"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::RankMismatch { left, right } => {
                write!(f, "rank mismatch: {left} vs {right}")
            }
            Error::UnsupportedResidueSolve { row, col } => write!(
                f,
                "entry ({row},{col}) needs a residue-field solve (equal diagonal valuations)"
            ),
            Error::UnsupportedFiber(msg) => write!(f, "unsupported fiber: {msg}"),
            Error::CyclicVectorNotFound => write!(f, "cyclic vector not found"),
            Error::SearchExhausted(msg) => write!(f, "search exhausted: {msg}"),
            Error::Internal(msg) => write!(f, "internal invariant violation: {msg}"),
        }
    }
}
