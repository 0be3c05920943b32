//! Model-comparison probes: training-set fitting capacity versus training
//! fraction, and the train/validation loss gap on a held-out split. Both
//! emit reports for inspection; neither is a hard correctness gate.

use std::time::Instant;

use graph_core::Graph;
use layers::{ModelKind, UgcnModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::AdamState;

use data_io::{
    stratified_kfold, CapacityReport, CapacityRow, GapCurve, GapReport,
};

use crate::engine::{evaluate, model_config, run_epoch};
use crate::{RunConfig, TrainError};

const PROBE_MODELS: [ModelKind; 4] =
    [ModelKind::Gcn, ModelKind::Gat, ModelKind::Sugcn, ModelKind::Gugcn];

#[derive(Debug, Clone)]
pub struct CapacityOptions {
    pub ratios: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions { ratios: vec![0.1, 0.3, 0.5, 0.7, 0.9], epochs: 500, batch_size: 32, seed: 0 }
    }
}

impl CapacityOptions {
    /// The fitting-capacity architecture: two plain blocks, no skip-sum,
    /// higher learning rate, no dropout.
    fn run_config(&self, model: ModelKind) -> RunConfig {
        RunConfig {
            model,
            hidden: 32,
            blocks: 2,
            dropout: 0.0,
            lr: 0.005,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            skip_sum: false,
            ..RunConfig::default()
        }
    }

    fn to_json(&self, dataset: &str) -> serde_json::Value {
        let base = self.run_config(ModelKind::Gcn);
        let mut json = base.to_json(dataset);
        json["probe"] = "capacity".into();
        json["ratios"] = serde_json::json!(self.ratios);
        json.as_object_mut().unwrap().remove("model");
        json.as_object_mut().unwrap().remove("folds");
        json
    }
}

/// Seeded subset shared by all models at a given ratio, so the comparison
/// at each training fraction sees identical data.
fn ratio_subset(n: usize, ratio: f64, seed: u64, ratio_idx: usize) -> Vec<usize> {
    let take = ((ratio * n as f64).ceil() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xCAFE + ratio_idx as u64));
    idx.shuffle(&mut rng);
    idx.truncate(take);
    idx.sort_unstable();
    idx
}

/// Final-epoch training accuracy per (model, ratio): how much of the
/// training set each architecture can absorb.
pub fn capacity_probe(
    graphs: &[Graph],
    num_classes: usize,
    opts: &CapacityOptions,
    dataset: &str,
) -> Result<CapacityReport, TrainError> {
    let in_dim = graphs[0].node_features().ncols();
    let started = Instant::now();
    let mut rows = Vec::new();
    for (ratio_idx, &ratio) in opts.ratios.iter().enumerate() {
        let subset = ratio_subset(graphs.len(), ratio, opts.seed, ratio_idx);
        for model_kind in PROBE_MODELS {
            let config = opts.run_config(model_kind);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut model = UgcnModel::init(model_config(&config, in_dim, num_classes), &mut rng);
            let mut adam = AdamState::new(config.lr, &model.param_shapes());
            for epoch in 0..opts.epochs {
                let mut order = subset.clone();
                let mut shuffle_rng =
                    ChaCha8Rng::seed_from_u64(opts.seed ^ (epoch as u64).wrapping_mul(0x9E37));
                order.shuffle(&mut shuffle_rng);
                run_epoch(&mut model, &mut adam, graphs, &order, opts.batch_size, &mut rng)
                    .map_err(|(batch, loss)| TrainError::Numeric(format!(
                        "capacity probe, model {}, ratio {ratio}: non-finite loss ({loss}) at epoch {epoch}, batch {batch}",
                        model_kind.as_str()
                    )))?;
            }
            let (_, final_train_acc) = evaluate(&model, graphs, &subset, opts.batch_size);
            eprintln!(
                "capacity: {} ratio {ratio} -> train acc {final_train_acc:.4} ({} graphs)",
                model_kind.as_str(),
                subset.len()
            );
            rows.push(CapacityRow {
                model: model_kind.as_str().to_string(),
                ratio,
                train_size: subset.len(),
                final_train_acc,
            });
        }
    }
    Ok(CapacityReport {
        config: opts.to_json(dataset),
        rows,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct GapOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
    pub blocks: usize,
    pub heads: usize,
    pub dropout: f64,
    pub lr: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        let base = RunConfig::default();
        GapOptions {
            epochs: base.epochs,
            batch_size: base.batch_size,
            seed: base.seed,
            hidden: base.hidden,
            blocks: base.blocks,
            heads: base.heads,
            dropout: base.dropout,
            lr: base.lr,
        }
    }
}

impl GapOptions {
    fn run_config(&self, model: ModelKind) -> RunConfig {
        RunConfig {
            model,
            hidden: self.hidden,
            blocks: self.blocks,
            heads: self.heads,
            batch_size: self.batch_size,
            dropout: self.dropout,
            lr: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            ..RunConfig::default()
        }
    }

    fn to_json(&self, dataset: &str) -> serde_json::Value {
        let mut json = self.run_config(ModelKind::Gcn).to_json(dataset);
        json["probe"] = "gap".into();
        json["split"] = "90/10".into();
        json.as_object_mut().unwrap().remove("model");
        json.as_object_mut().unwrap().remove("folds");
        json
    }
}

/// Per-epoch train/validation losses on a seeded 90/10 split, one curve per
/// model. Both losses are eval-mode passes so the gap compares like with
/// like (no dropout noise on the training side). The headline number is the
/// mean gap over the last 50 epochs (or all of them, if fewer).
pub fn generalization_probe(
    graphs: &[Graph],
    num_classes: usize,
    opts: &GapOptions,
    dataset: &str,
) -> Result<GapReport, TrainError> {
    let labels: Vec<usize> = graphs.iter().map(|g| g.label()).collect();
    let plan = stratified_kfold(&labels, 10, opts.seed)?;
    let val_idx = plan.test_fold(0).to_vec();
    let train_idx = plan.train_indices(0);
    let in_dim = graphs[0].node_features().ncols();

    let started = Instant::now();
    let mut models = Vec::new();
    for model_kind in PROBE_MODELS {
        let config = opts.run_config(model_kind);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut model = UgcnModel::init(model_config(&config, in_dim, num_classes), &mut rng);
        let mut adam = AdamState::new(config.lr, &model.param_shapes());
        let mut train_loss = Vec::with_capacity(opts.epochs);
        let mut val_loss = Vec::with_capacity(opts.epochs);
        for epoch in 0..opts.epochs {
            let mut order = train_idx.clone();
            let mut shuffle_rng =
                ChaCha8Rng::seed_from_u64(opts.seed ^ (epoch as u64).wrapping_mul(0x9E37));
            order.shuffle(&mut shuffle_rng);
            run_epoch(&mut model, &mut adam, graphs, &order, opts.batch_size, &mut rng)
                .map_err(|(batch, loss)| TrainError::Numeric(format!(
                    "gap probe, model {}: non-finite loss ({loss}) at epoch {epoch}, batch {batch}",
                    model_kind.as_str()
                )))?;
            train_loss.push(evaluate(&model, graphs, &train_idx, opts.batch_size).0);
            val_loss.push(evaluate(&model, graphs, &val_idx, opts.batch_size).0);
        }
        let window = opts.epochs.min(50);
        let mean_gap_last_50 = if window == 0 {
            0.0
        } else {
            train_loss
                .iter()
                .zip(&val_loss)
                .skip(opts.epochs - window)
                .map(|(t, v)| v - t)
                .sum::<f64>()
                / window as f64
        };
        eprintln!(
            "gap: {} mean gap over last {window} epochs = {mean_gap_last_50:.4}",
            model_kind.as_str()
        );
        models.push(GapCurve {
            model: model_kind.as_str().to_string(),
            train_loss,
            val_loss,
            mean_gap_last_50,
        });
    }
    Ok(GapReport {
        config: opts.to_json(dataset),
        models,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}
