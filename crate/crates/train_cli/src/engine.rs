//! The fold training loop and the cross-validation protocol around it.

use std::time::Instant;

use graph_core::{batch_graphs, Graph};
use layers::{BatchData, UgcnConfig, UgcnModel};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::{AdamState, Mode, Tape};

use data_io::{stratified_kfold, EpochRecord, FoldRecord, Summary, TrainReport};

use crate::{RunConfig, TrainError};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG streams for (seed, fold, purpose); purpose 0 is the
/// fold's init/dropout stream and purpose 1+epoch drives batch shuffling.
fn stream_seed(seed: u64, fold: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ fold) ^ purpose)
}

pub(crate) fn model_config(config: &RunConfig, in_dim: usize, num_classes: usize) -> UgcnConfig {
    UgcnConfig {
        kind: config.model,
        in_dim,
        num_classes,
        hidden: config.hidden,
        num_blocks: config.blocks,
        heads: config.heads,
        dropout: config.dropout,
        normalize_attention: config.normalize_attention,
        skip_sum: config.skip_sum,
    }
}

fn argmax_row(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

fn count_correct(logits: &Array2<f64>, labels: &[usize]) -> usize {
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &label)| argmax_row(*row) == label)
        .count()
}

fn batch_data(graphs: &[Graph], idx: &[usize]) -> BatchData {
    let selection: Vec<Graph> = idx.iter().map(|&i| graphs[i].clone()).collect();
    let batch = batch_graphs(&selection).expect("non-empty batch of uniform width");
    BatchData::from_batch(&batch).expect("batch already validated")
}

/// One pass over `order` in mini-batches, updating the model in place.
/// Returns the example-weighted mean loss and accuracy over the pass, or
/// the offending (batch, loss) pair when the loss turns non-finite.
pub(crate) fn run_epoch(
    model: &mut UgcnModel,
    adam: &mut AdamState,
    graphs: &[Graph],
    order: &[usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), (usize, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for (batch_no, chunk) in order.chunks(batch_size).enumerate() {
        let data = batch_data(graphs, chunk);
        let tape = Tape::new();
        let (logits, bound) = model.forward(&tape, &data, Mode::Train, rng);
        let loss = logits.cross_entropy(&data.labels);
        let loss_val = loss.value()[[0, 0]];
        if !loss_val.is_finite() {
            return Err((batch_no, loss_val));
        }
        correct += count_correct(&logits.value(), &data.labels);
        loss_sum += loss_val * chunk.len() as f64;
        loss.backward();
        let grads: Vec<Option<Array2<f64>>> = bound.iter().map(|t| t.grad()).collect();
        adam.step(&mut model.params_mut(), &grads);
    }
    let n = order.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Eval-mode loss and accuracy over `idx`, chunked so large index sets do
/// not build one giant batch. Chunking cannot change the result: eval mode
/// uses running statistics and per-graph readout only.
pub fn evaluate(
    model: &UgcnModel,
    graphs: &[Graph],
    idx: &[usize],
    batch_size: usize,
) -> (f64, f64) {
    assert!(!idx.is_empty(), "evaluate needs at least one graph");
    let mut rng = ChaCha8Rng::seed_from_u64(0); // eval mode draws nothing
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for chunk in idx.chunks(batch_size) {
        let data = batch_data(graphs, chunk);
        let tape = Tape::new();
        let (logits, _) = model.forward(&tape, &data, Mode::Eval, &mut rng);
        let loss = logits.cross_entropy(&data.labels);
        loss_sum += loss.value()[[0, 0]] * chunk.len() as f64;
        correct += count_correct(&logits.value(), &data.labels);
    }
    let n = idx.len() as f64;
    (loss_sum / n, correct as f64 / n)
}

/// Train one fold: fresh model, Adam, per-epoch shuffle/update/measure.
/// A non-finite loss aborts the fold and is recorded on the curve record;
/// epochs completed before the abort are kept.
pub fn train_fold(
    graphs: &[Graph],
    num_classes: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    config: &RunConfig,
    fold: usize,
) -> FoldRecord {
    let in_dim = graphs[0].node_features().ncols();
    let mut fold_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, fold as u64, 0));
    let mut model = UgcnModel::init(model_config(config, in_dim, num_classes), &mut fold_rng);
    let mut adam = AdamState::new(config.lr, &model.param_shapes());

    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order = train_idx.to_vec();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(stream_seed(config.seed, fold as u64, 1 + epoch as u64));
        order.shuffle(&mut shuffle_rng);
        match run_epoch(
            &mut model,
            &mut adam,
            graphs,
            &order,
            config.batch_size,
            &mut fold_rng,
        ) {
            Ok((train_loss, train_acc)) => {
                let (_, test_acc) = evaluate(&model, graphs, test_idx, config.batch_size);
                epochs.push(EpochRecord { train_loss, train_acc, test_acc });
            }
            Err((batch, loss)) => {
                return FoldRecord {
                    fold,
                    epochs,
                    error: Some(format!(
                        "non-finite loss ({loss}) at epoch {epoch}, batch {batch}"
                    )),
                };
            }
        }
    }
    FoldRecord { fold, epochs, error: None }
}

/// Cross-fold mean test accuracy per epoch; the summary reports the maximum
/// over epochs and the across-fold standard deviation at that epoch.
pub(crate) fn summarize(folds: &[FoldRecord], epochs: usize) -> Summary {
    let complete: Vec<&FoldRecord> = folds.iter().filter(|f| f.error.is_none()).collect();
    if complete.is_empty() || epochs == 0 {
        return Summary { mean_acc: 0.0, std_acc: 0.0, best_epoch: 0, completed_folds: 0 };
    }
    let mut best_epoch = 0;
    let mut best_mean = f64::NEG_INFINITY;
    for e in 0..epochs {
        let mean = complete.iter().map(|f| f.epochs[e].test_acc).sum::<f64>()
            / complete.len() as f64;
        if mean > best_mean {
            best_mean = mean;
            best_epoch = e;
        }
    }
    let accs: Vec<f64> = complete.iter().map(|f| f.epochs[best_epoch].test_acc).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
    Summary {
        mean_acc: mean,
        std_acc: var.sqrt(),
        best_epoch,
        completed_folds: complete.len(),
    }
}

/// Stratified k-fold cross-validation under one shared config. Failed folds
/// are recorded and skipped by the summary; the run always completes.
pub fn run_cv(
    graphs: &[Graph],
    num_classes: usize,
    config: &RunConfig,
    dataset: &str,
) -> Result<TrainReport, TrainError> {
    let labels: Vec<usize> = graphs.iter().map(|g| g.label()).collect();
    let plan = stratified_kfold(&labels, config.folds, config.seed)?;
    let started = Instant::now();
    let mut folds = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let train_idx = plan.train_indices(fold);
        let record = train_fold(graphs, num_classes, &train_idx, plan.test_fold(fold), config, fold);
        if let Some(err) = &record.error {
            eprintln!("fold {fold}: aborted: {err}");
        } else {
            let last = record.epochs.last().map_or(0.0, |e| e.test_acc);
            eprintln!(
                "fold {fold}: done ({} epochs, final test acc {last:.4})",
                record.epochs.len()
            );
        }
        folds.push(record);
    }
    let summary = summarize(&folds, config.epochs);
    Ok(TrainReport {
        config: config.to_json(dataset),
        folds,
        summary,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}
