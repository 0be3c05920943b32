//! TU-format parsing: `<name>_A.txt` (1-based edge pairs),
//! `<name>_graph_indicator.txt` (graph id per node), `<name>_graph_labels.txt`,
//! and optionally `<name>_node_labels.txt`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use graph_core::Graph;
use ndarray::Array2;

use crate::DataError;

/// Dataset statistics, computed from the parsed content.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub num_graphs: usize,
    pub num_classes: usize,
    pub avg_nodes: f64,
    pub max_nodes: usize,
    pub has_node_labels: bool,
}

/// A parsed dataset. Graphs carry placeholder single-column features until
/// `build_features` attaches real ones; node labels (remapped to 0-based
/// contiguous ids) ride alongside because `Graph` itself has no label slot.
#[derive(Debug, Clone)]
pub struct TuDataset {
    pub graphs: Vec<Graph>,
    /// Per graph, per node: remapped node label. Present iff the optional
    /// node label file exists.
    pub node_labels: Option<Vec<Vec<usize>>>,
    /// Number of distinct node labels across the dataset.
    pub num_node_labels: usize,
    pub meta: DatasetMeta,
}

impl TuDataset {
    /// Graph class labels, in graph order.
    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label()).collect()
    }
}

/// Reads every integer on every line of `path`. Tokens may be separated by
/// whitespace or commas (TU files in the wild use both). Returns one Vec per
/// non-empty line.
fn read_int_lines(path: &Path) -> Result<Vec<Vec<i64>>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile(path.to_path_buf())
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let mut row = Vec::new();
        for token in raw.split(|c: char| c == ',' || c.is_whitespace()) {
            if token.is_empty() {
                continue;
            }
            row.push(token.parse::<i64>().map_err(|_| DataError::NonInteger {
                file: file.clone(),
                line: i + 1,
                token: token.to_string(),
            })?);
        }
        if !row.is_empty() {
            lines.push(row);
        }
    }
    Ok(lines)
}

fn single_column(path: &Path) -> Result<Vec<i64>, DataError> {
    Ok(read_int_lines(path)?
        .into_iter()
        .map(|row| row[0])
        .collect())
}

/// Remaps arbitrary integer labels to 0..K-1, assigning ids in ascending
/// order of the original value (deterministic across platforms).
fn remap(values: &[i64]) -> (Vec<usize>, usize) {
    let distinct: BTreeSet<i64> = values.iter().copied().collect();
    let index: std::collections::BTreeMap<i64, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    (values.iter().map(|&v| index[&v]).collect(), distinct.len())
}

/// Parses the four TU files of `name` under `dir`.
pub fn parse_tu_dataset(dir: &Path, name: &str) -> Result<TuDataset, DataError> {
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let indicator = single_column(&indicator_path)?;
    if indicator.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let total_nodes = indicator.len();

    let label_rows = single_column(&file("graph_labels"))?;
    let num_graphs = label_rows.len();
    if num_graphs == 0 {
        return Err(DataError::EmptyDataset);
    }

    // Graph id per node, validated against the label file's graph count.
    let indicator_file = format!("{name}_graph_indicator.txt");
    let mut graph_of_node = Vec::with_capacity(total_nodes);
    for (i, &gid) in indicator.iter().enumerate() {
        if gid < 1 || gid as usize > num_graphs {
            return Err(DataError::UnknownGraph {
                file: indicator_file.clone(),
                line: i + 1,
                graph: gid.max(0) as usize,
            });
        }
        graph_of_node.push(gid as usize - 1);
    }

    // Global node index -> (graph, local index), locals assigned in file order.
    let mut local_of_node = Vec::with_capacity(total_nodes);
    let mut nodes_per_graph = vec![0usize; num_graphs];
    for &g in &graph_of_node {
        local_of_node.push(nodes_per_graph[g]);
        nodes_per_graph[g] += 1;
    }

    // Edges, grouped per graph after the 1-based -> 0-based shift.
    let edge_file = format!("{name}_A.txt");
    let mut edges_per_graph: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (i, row) in read_int_lines(&file("A"))?.into_iter().enumerate() {
        if row.len() < 2 {
            return Err(DataError::NonInteger {
                file: edge_file.clone(),
                line: i + 1,
                token: "missing second endpoint".to_string(),
            });
        }
        let (u, v) = (row[0], row[1]);
        let check = |x: i64| -> Result<usize, DataError> {
            if x < 1 || x as usize > total_nodes {
                Err(DataError::NodeOutOfRange {
                    file: edge_file.clone(),
                    line: i + 1,
                    node: x.max(0) as usize,
                    total: total_nodes,
                })
            } else {
                Ok(x as usize - 1)
            }
        };
        let (u, v) = (check(u)?, check(v)?);
        if graph_of_node[u] != graph_of_node[v] {
            return Err(DataError::CrossGraphEdge {
                line: i + 1,
                u: u + 1,
                v: v + 1,
            });
        }
        edges_per_graph[graph_of_node[u]].push((local_of_node[u], local_of_node[v]));
    }

    let (labels, num_classes) = remap(&label_rows);

    // Optional node labels, remapped dataset-wide.
    let node_label_path = file("node_labels");
    let (node_labels, num_node_labels) = if node_label_path.exists() {
        let raw = single_column(&node_label_path)?;
        if raw.len() != total_nodes {
            return Err(DataError::LineCountMismatch {
                file: format!("{name}_node_labels.txt"),
                expected: total_nodes,
                found: raw.len(),
            });
        }
        let (mapped, distinct) = remap(&raw);
        let mut per_graph: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
        for (node, &lbl) in mapped.iter().enumerate() {
            per_graph[graph_of_node[node]].push(lbl);
        }
        (Some(per_graph), distinct)
    } else {
        (None, 0)
    };

    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let n = nodes_per_graph[g];
        // Placeholder features; build_features swaps in the real ones.
        let placeholder = Array2::<f64>::ones((n, 1));
        graphs.push(Graph::new(n, &edges_per_graph[g], placeholder, labels[g])?);
    }

    let max_nodes = nodes_per_graph.iter().copied().max().unwrap_or(0);
    let avg_nodes = total_nodes as f64 / num_graphs as f64;
    let meta = DatasetMeta {
        name: name.to_string(),
        num_graphs,
        num_classes,
        avg_nodes,
        max_nodes,
        has_node_labels: node_labels.is_some(),
    };

    Ok(TuDataset {
        graphs,
        node_labels,
        num_node_labels,
        meta,
    })
}
