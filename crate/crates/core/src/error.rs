use std::path::PathBuf;

/// Errors produced anywhere in the synthesis and auditing pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // data
    #[error("column `{0}` in header is not declared in the schema")]
    UnknownColumn(String),
    #[error("schema column `{0}` is missing from the CSV header")]
    MissingHeader(String),
    #[error("cannot parse cell at row {row}, column `{column}`: {value:?}")]
    UnparsableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value at row {row} in column `{column}` which does not allow missing values")]
    MissingNotAllowed { row: usize, column: String },
    #[error("row {row} has a missing target label")]
    MissingTarget { row: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("class {class} of the target has fewer than 2 rows")]
    DegenerateClass { class: String },
    #[error("requested {requested} rows but the table only has {available}")]
    NTooLarge { requested: usize, available: usize },
    #[error("row has {got} cells, schema has {expected} columns")]
    RowArity { expected: usize, got: usize },

    // encoder
    #[error("cannot fit a mixture to an empty column")]
    EmptyInput,
    #[error("mode indicator is not a valid one-hot vector")]
    InvalidOneHot,
    #[error("log transform argument is not positive: {0}")]
    DomainError(f64),
    #[error("encoded vector has length {got}, layout expects {expected}")]
    LayoutMismatch { expected: usize, got: usize },

    // conditioning
    #[error("condition ({column}, {class}) is out of range")]
    OutOfRange { column: usize, class: usize },
    #[error("segment probabilities sum to {0}, not 1")]
    NonDistribution(f64),

    // autodiff
    #[error("backward requires a scalar loss, got shape {rows}x{cols}")]
    NotScalarLoss { rows: usize, cols: usize },
    #[error("operation `{0}` does not support double backpropagation")]
    UnsupportedOpForDoubleBackprop(&'static str),
    #[error("shape mismatch in `{op}`: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    // gan
    #[error("feature widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        detail: String,
    },
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    // privacy
    #[error("privacy ledger is empty")]
    EmptyLedger,
    #[error("privacy budget allows no iterations")]
    BudgetTooSmall,
    #[error("numerical overflow evaluating the subsampled RDP bound at order {0}")]
    NumericalOverflow(u32),
    #[error("invalid privacy specification: {0}")]
    InvalidPrivacySpec(String),

    // metrics
    #[error("distribution has no mass")]
    EmptyDistribution,
    #[error("tables do not share a schema: {0}")]
    SchemaMismatch(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("training set contains a single class")]
    SingleClassTrainingSet,

    // attacks
    #[error("generator failed: {0}")]
    GeneratorFailure(String),
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("invalid attack configuration: {0}")]
    InvalidAttackConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
