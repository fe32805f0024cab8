use std::fmt;

use thiserror::Error;

/// A single problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `observables[1].matrix`.
    pub field: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NotHermitian {
        deviation: f64,
    },
    NotNormalized {
        norm: f64,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    TargetOutOfRange {
        index: usize,
        factors: usize,
    },
    DuplicateTarget {
        index: usize,
    },
    NonFinite,
    InvalidPointer(String),
    InvalidCoupling(String),
    LengthMismatch {
        observables: usize,
        pointers: usize,
        couplings: usize,
    },
    Empty(String),
    /// `|<F|I>|` below the overlap floor: the weak-value denominator vanishes.
    DivergentWeakValue {
        overlap: f64,
        floor: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.field)?;
        match &self.kind {
            ViolationKind::NotHermitian { deviation } => {
                write!(f, "observable not Hermitian (max |M - M^dag| = {deviation:.3e})")
            }
            ViolationKind::NotNormalized { norm } => write!(f, "state not normalized (norm = {norm:.15})"),
            ViolationKind::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch (expected {expected}, found {found})")
            }
            ViolationKind::TargetOutOfRange { index, factors } => {
                write!(f, "target factor {index} out of range ({factors} system factors)")
            }
            ViolationKind::DuplicateTarget { index } => write!(f, "target factor {index} listed twice"),
            ViolationKind::NonFinite => write!(f, "non-finite entry"),
            ViolationKind::InvalidPointer(msg) => write!(f, "invalid pointer: {msg}"),
            ViolationKind::InvalidCoupling(msg) => write!(f, "invalid coupling: {msg}"),
            ViolationKind::LengthMismatch { observables, pointers, couplings } => write!(
                f,
                "observables ({observables}), pointers ({pointers}) and couplings ({couplings}) must have equal length"
            ),
            ViolationKind::Empty(msg) => write!(f, "{msg}"),
            ViolationKind::DivergentWeakValue { overlap, floor } => write!(
                f,
                "divergent weak value: |<F|I>| = {overlap:.3e} is below the overlap floor {floor:.1e}"
            ),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum WeakError {
    #[error("capacity exceeded: total dimension {requested} is above the maximum {max}")]
    Capacity { requested: usize, max: usize },

    #[error("layout mismatch: {left:?} vs {right:?}")]
    LayoutMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("factor slot {slot} out of range for layout with {factors} factors")]
    SlotOutOfRange { slot: usize, factors: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |M - M^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("numerical contract violated: {0}")]
    Numerical(String),

    #[error("state has zero norm")]
    DegenerateState,

    #[error("invalid scenario: {}", join_violations(.0))]
    InvalidScenario(Vec<Violation>),

    #[error(
        "divergent weak value: |<F|I>| = {overlap:.3e} is below the overlap floor {floor:.1e}"
    )]
    DivergentWeakValue { overlap: f64, floor: f64 },

    #[error("scenario schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error(
        "truncation leakage {leakage:.3e} in the top two Fock levels of pointer {pointer} (d = {dim}); raise the Fock dimension or lower gt"
    )]
    TruncationLeakage {
        pointer: usize,
        leakage: f64,
        dim: usize,
    },

    #[error("post-selection failed: success probability {prob:.3e} is below {floor:.1e}")]
    PostSelectionFailure { prob: f64, floor: f64 },

    #[error("pointer {pointer} has zero coupling; extraction needs a finite gt in simulation")]
    ZeroCoupling { pointer: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("position grid too narrow: {mass:.3e} of the density lies off-grid")]
    Grid { mass: f64 },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<WeakError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WeakError {
    pub fn context(self, context: impl Into<String>) -> Self {
        WeakError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &WeakError {
        match self {
            WeakError::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = WeakError> = std::result::Result<T, E>;
