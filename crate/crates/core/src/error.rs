use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("requested {k} clusters but only {n} points are available")]
    TooManyClusters { k: usize, n: usize },

    #[error("exact enumeration is limited to {limit} points, got {n}")]
    EnumerationGuard { n: usize, limit: usize },

    #[error("all clusters are empty")]
    AllClustersEmpty,

    #[error("need at least {needed} centroids, got {got}")]
    TooFewCentroids { needed: usize, got: usize },

    #[error("degenerate radius: {0}")]
    DegenerateRadius(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("dataset has no true centers")]
    MissingTrueCenters,

    #[error("client {0} holds no points")]
    EmptyClient(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("separation precondition violated: {0}")]
    SeparationViolated(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
