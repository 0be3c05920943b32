//! Serializable run reports and the JSON export/import pair.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::DataError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FoldRecord {
    pub fold: usize,
    pub epochs: Vec<EpochRecord>,
    /// Populated when the fold aborted (e.g. on a non-finite loss); the
    /// run keeps going and the summary flags the gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub mean_acc: f64,
    pub std_acc: f64,
    pub best_epoch: usize,
    pub completed_folds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainReport {
    pub config: serde_json::Value,
    pub folds: Vec<FoldRecord>,
    pub summary: Summary,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CapacityRow {
    pub model: String,
    pub ratio: f64,
    pub train_size: usize,
    pub final_train_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CapacityReport {
    pub config: serde_json::Value,
    pub rows: Vec<CapacityRow>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapCurve {
    pub model: String,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub mean_gap_last_50: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapReport {
    pub config: serde_json::Value,
    pub models: Vec<GapCurve>,
    pub runtime_seconds: f64,
}

/// Pretty-printed JSON with a trailing newline.
pub fn export_metrics<T: Serialize>(report: &T, path: &Path) -> Result<(), DataError> {
    let mut body = serde_json::to_string_pretty(report).map_err(|source| {
        DataError::MalformedMetrics { path: path.to_path_buf(), source }
    })?;
    body.push('\n');
    fs::write(path, body).map_err(|source| DataError::UnwritablePath {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_metrics<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let body = fs::read_to_string(path).map_err(|source| DataError::UnreadablePath {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&body)
        .map_err(|source| DataError::MalformedMetrics { path: path.to_path_buf(), source })
}
