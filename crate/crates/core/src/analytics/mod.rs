//! Patient clustering and per-cluster medication recommendation.
//!
//! Records are normalized into a [`FeatureMatrix`], grouped with k-means,
//! and each cluster gets a linear SVM predicting a good outcome. A cluster
//! model may recommend only after passing the holdout gate in
//! [`certify`].

mod distance;
mod kmeans;
mod model_io;
mod outcome;
mod precision;
mod svm;
mod table;

pub use distance::euclidean_distance;
pub use kmeans::{kmeans, kmeans_restarts, ClusterModel, DEFAULT_K, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use model_io::SavedModel;
pub use outcome::{
    certify, fit_outcome_models, holdout_split, recommend, OutcomeModel, Recommendation,
    CERTIFICATION_GATE, HOLDOUT_FRACTION,
};
pub use precision::{
    cluster_d, cluster_precision, precision_of, ClusterPrecision, PrecisionReport, TOP_CLUSTERS,
};
pub use svm::{
    objective, objective_gradient, train_svm, LinearSvm, SvmParams, DEFAULT_EPOCHS, DEFAULT_LAMBDA,
};
pub use table::{
    indicator_name, normalize, ColumnEncoding, ColumnKind, Encoder, FeatureMatrix, RawTable, Value,
    MISSING,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("need at least 2 rows, got {0}")]
    EmptyTable(usize),
    #[error("every column is constant")]
    AllConstant,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("row count mismatch: expected {expected}, got {actual}")]
    RowMismatch { expected: usize, actual: usize },
    #[error("k={k} must be between 1 and the row count {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("a reported cluster has only {0} member(s)")]
    ClusterTooSmall(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("holdout set is empty")]
    EmptyHoldout,
    #[error("cluster {0} has no certified outcome model")]
    ModelNotCertified(usize),
    #[error("no candidate medication values")]
    NoCandidates,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
}
