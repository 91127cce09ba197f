use crate::trial::ComplianceClass;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("unknown food item `{0}`")]
    UnknownFoodItem(String),

    #[error("dataset contains no trials")]
    EmptyDataset,

    #[error("degenerate {stream} stream: {samples} sample(s) remain, need at least 2")]
    DegenerateStream { stream: &'static str, samples: usize },

    #[error("no sustained contact found")]
    NoContact,

    #[error("degenerate series: need at least 2 points spanning a positive time interval")]
    DegenerateSeries,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid feature set: {0}")]
    InvalidFeatureSet(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("no training data for class {0}")]
    MissingClass(ComplianceClass),

    #[error("training data contains fewer than two classes")]
    SingleClassData,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("class {0} has too few trials for the requested fold count")]
    TooFewTrials(ComplianceClass),

    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trial `{id}`: {source}")]
    Trial {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn in_trial(self, id: &str) -> Self {
        Error::Trial {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    pub fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }

    /// The innermost error, with trial and fold context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } | Error::Fold { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics (divergence, degenerate statistics)
    /// as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFiniteLoss { .. } | Error::DegenerateGroups(_)
        )
    }
}
