//! Experiment runner: fold training, the cross-validation protocol, the
//! capacity and generalization probes, and shared configuration.

use std::path::Path;

use graph_core::{add_self_loops, Graph, GraphError};
use layers::ModelKind;
use thiserror::Error;

use data_io::{build_features, parse_tu_dataset, DataError, DatasetMeta};

mod engine;
mod probes;

pub use engine::{evaluate, run_cv, train_fold};
pub use probes::{capacity_probe, generalization_probe, CapacityOptions, GapOptions};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Numeric(String),
}

/// Hyperparameters for one cross-validation run. Defaults are the grid
/// centers; everything is overridable from the CLI.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub blocks: usize,
    pub heads: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
    pub normalize_attention: bool,
    pub skip_sum: bool,
    pub degree_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Gcn,
            hidden: 32,
            blocks: 5,
            heads: 4,
            batch_size: 32,
            dropout: 0.5,
            lr: 0.001,
            epochs: 500,
            folds: 10,
            seed: 0,
            normalize_attention: false,
            skip_sum: true,
            degree_cap: data_io::DEFAULT_DEGREE_CAP,
        }
    }
}

impl RunConfig {
    pub fn to_json(&self, dataset: &str) -> serde_json::Value {
        serde_json::json!({
            "dataset": dataset,
            "model": self.model.as_str(),
            "hidden": self.hidden,
            "blocks": self.blocks,
            "heads": self.heads,
            "batch_size": self.batch_size,
            "dropout": self.dropout,
            "lr": self.lr,
            "epochs": self.epochs,
            "folds": self.folds,
            "seed": self.seed,
            "normalize_attention": self.normalize_attention,
            "skip_sum": self.skip_sum,
            "degree_cap": self.degree_cap,
        })
    }
}

/// A dataset ready for training: featured graphs plus its source statistics.
pub struct LoadedDataset {
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub meta: DatasetMeta,
}

impl LoadedDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label()).collect()
    }
}

/// Parse a TU-format directory and attach features (one-hot node labels
/// where present, capped one-hot degrees otherwise). Self-loops are added
/// last — after degree features, which count true neighbors only — because
/// every model here aggregates over neighborhoods that include the node
/// itself, and rare isolated nodes (e.g. in PROTEINS) would otherwise have
/// no neighborhood at all.
pub fn load_dataset(dir: &Path, name: &str, degree_cap: usize) -> Result<LoadedDataset, DataError> {
    let ds = parse_tu_dataset(dir, name)?;
    let graphs = build_features(&ds, degree_cap)?
        .iter()
        .map(add_self_loops)
        .collect();
    Ok(LoadedDataset {
        graphs,
        num_classes: ds.meta.num_classes,
        meta: ds.meta,
    })
}
