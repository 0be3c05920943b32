//! Dataset plumbing: TU-format parsing, feature construction, stratified
//! fold plans, and the metrics file format shared by all CLI subcommands.

mod features;
mod folds;
mod metrics;
mod tu;

use std::path::PathBuf;

use thiserror::Error;

pub use features::{build_features, DEFAULT_DEGREE_CAP};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{
    export_metrics, read_metrics, CapacityReport, CapacityRow, EpochRecord, FoldRecord,
    GapCurve, GapReport, Summary, TrainReport,
};
pub use tu::{parse_tu_dataset, DatasetMeta, TuDataset};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("required dataset file is missing: {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: expected an integer, found {token:?}")]
    NonInteger {
        file: String,
        line: usize,
        token: String,
    },
    #[error("{file}:{line}: node indicator references unknown graph {graph}")]
    UnknownGraph {
        file: String,
        line: usize,
        graph: usize,
    },
    #[error("{file}:{line}: node index {node} out of range (dataset has {total} nodes)")]
    NodeOutOfRange {
        file: String,
        line: usize,
        node: usize,
        total: usize,
    },
    #[error("edge list line {line}: edge ({u}, {v}) crosses graph boundaries")]
    CrossGraphEdge { line: usize, u: usize, v: usize },
    #[error("{file}: expected {expected} lines, found {found}")]
    LineCountMismatch {
        file: String,
        expected: usize,
        found: usize,
    },
    #[error("dataset contains no graphs")]
    EmptyDataset,
    #[error("fold count {k} invalid for {n} graphs (need 2 <= k <= n)")]
    BadFoldCount { k: usize, n: usize },
    #[error("cannot write metrics to {path}: {source}")]
    UnwritablePath {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    UnreadablePath {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed metrics file {path}: {source}")]
    MalformedMetrics {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Graph(#[from] graph_core::GraphError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
