use std::fmt;

/// One violated constraint found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub kind: IssueKind,
    /// Dotted path of the offending field, e.g. `grid.delta`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    MissingField,
    BadUnits,
    GeometryViolation,
    Invalid,
}

impl IssueKind {
    pub fn code(self) -> &'static str {
        match self {
            IssueKind::MissingField => "MISSING_FIELD",
            IssueKind::BadUnits => "BAD_UNITS",
            IssueKind::GeometryViolation => "GEOMETRY_VIOLATION",
            IssueKind::Invalid => "INVALID",
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at `{}`: {}", self.kind.code(), self.path, self.message)
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_issues(.0))]
    Config(Vec<ConfigIssue>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid spacing {delta:.4e} m exceeds the maximum {max:.4e} m at this frequency")]
    GridTooCoarse { delta: f64, max: f64 },
    #[error("sparse factorization failed: {0}")]
    SingularMatrix(String),
    #[error("receiver {index} lies inside the absorbing layer")]
    ReceiverInPml { index: usize },
    #[error("receiver {index} lies inside the inversion grid")]
    ReceiverInsideGrid { index: usize },
    #[error("series did not converge: {0}")]
    NoConvergence(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("unsupported mixed norm ({alpha}, {beta})")]
    UnsupportedNorm { alpha: f64, beta: f64 },
    #[error("negative projection radius {0}")]
    NegativeRadius(f64),
    #[error("line search failed after {0} backtracks")]
    LinesearchFailed(usize),
    #[error("residual is zero")]
    ZeroResidual,
    #[error("Pareto derivative {0} is not negative")]
    NonnegativeDerivative(f64),
    #[error("iteration limit {0} reached")]
    MaxIterations(usize),
    #[error("matrix with {0} columns is too large for exhaustive spark computation")]
    TooLargeForSpark(usize),
    #[error("no data for frequency index {0}")]
    EmptyFrequency(usize),
    #[error("sampling point coincides with receiver {0}")]
    SampleOnReceiver(usize),
    #[error("image is identically zero")]
    AllZeroImage,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported dataset version `{0}`")]
    VersionMismatch(String),
    #[error("corrupt record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("duplicate record (freq {freq}, source {source_index}, receiver {receiver})")]
    DuplicateTriple {
        freq: usize,
        source_index: usize,
        receiver: usize,
    },
    #[error("cross-validation split of {requested} out of {available} receivers is not possible")]
    CvTooLarge { requested: usize, available: usize },
    #[error("shape {0} extends outside the grid")]
    ShapeOutOfGrid(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(issues) => issues
                .first()
                .map(|i| i.kind.code())
                .unwrap_or("INVALID"),
            Error::Parse(_) => "PARSE_ERROR",
            Error::Io(_) => "IO_ERROR",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::GridTooCoarse { .. } => "GRID_TOO_COARSE",
            Error::SingularMatrix(_) => "SINGULAR_MATRIX",
            Error::ReceiverInPml { .. } => "RECEIVER_IN_PML",
            Error::ReceiverInsideGrid { .. } => "RECEIVER_INSIDE_GRID",
            Error::NoConvergence(_) => "NO_CONVERGENCE",
            Error::DimMismatch(_) => "DIM_MISMATCH",
            Error::UnsupportedNorm { .. } => "UNSUPPORTED_NORM",
            Error::NegativeRadius(_) => "NEGATIVE_RADIUS",
            Error::LinesearchFailed(_) => "LINESEARCH_FAILED",
            Error::ZeroResidual => "ZERO_RESIDUAL",
            Error::NonnegativeDerivative(_) => "NONNEGATIVE_DERIVATIVE",
            Error::MaxIterations(_) => "MAX_ITERATIONS",
            Error::TooLargeForSpark(_) => "TOO_LARGE_FOR_SPARK",
            Error::EmptyFrequency(_) => "EMPTY_FREQUENCY",
            Error::SampleOnReceiver(_) => "SAMPLE_ON_RECEIVER",
            Error::AllZeroImage => "ALL_ZERO_IMAGE",
            Error::GridMismatch(_) => "GRID_MISMATCH",
            Error::VersionMismatch(_) => "VERSION_MISMATCH",
            Error::CorruptRecord { .. } => "CORRUPT_RECORD",
            Error::DuplicateTriple { .. } => "DUPLICATE_TRIPLE",
            Error::CvTooLarge { .. } => "CV_TOO_LARGE",
            Error::ShapeOutOfGrid(_) => "SHAPE_OUT_OF_GRID",
            Error::Unsupported(_) => "UNSUPPORTED",
        }
    }

    /// Issues carried by a configuration error; empty for every other variant.
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            Error::Config(issues) => issues,
            _ => &[],
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
