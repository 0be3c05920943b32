//! Node feature construction: one-hot node labels where the dataset has
//! them, one-hot (capped) degree otherwise.

use graph_core::{degree_features, Graph};
use ndarray::Array2;

use crate::{DataError, TuDataset};

/// Default degree cap: the largest max-node count among the bundled social
/// datasets (IMDB-BINARY), so no bundled dataset actually truncates.
pub const DEFAULT_DEGREE_CAP: usize = 136;

/// Returns the dataset's graphs with real feature matrices attached. Width
/// is uniform across the dataset: the node label alphabet size, or
/// `degree_cap + 1` buckets (degrees above the cap share the top bucket).
pub fn build_features(dataset: &TuDataset, degree_cap: usize) -> Result<Vec<Graph>, DataError> {
    match &dataset.node_labels {
        Some(per_graph) => {
            let width = dataset.num_node_labels;
            let mut out = Vec::with_capacity(dataset.graphs.len());
            for (g, labels) in dataset.graphs.iter().zip(per_graph) {
                let mut feats = Array2::<f64>::zeros((g.num_nodes(), width));
                for (i, &lbl) in labels.iter().enumerate() {
                    feats[[i, lbl]] = 1.0;
                }
                out.push(g.clone().with_features(feats)?);
            }
            Ok(out)
        }
        None => dataset
            .graphs
            .iter()
            .map(|g| {
                let feats = degree_features(g, degree_cap);
                Ok(g.clone().with_features(feats)?)
            })
            .collect(),
    }
}
