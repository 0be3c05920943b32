//! `ugcn`: train graph classifiers under cross-validation, verify the
//! depthwise/pointwise decompositions, and run the model-comparison probes.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use data_io::{export_metrics, DataError, DEFAULT_DEGREE_CAP};
use layers::ModelKind;
use train_cli::{
    capacity_probe, generalization_probe, load_dataset, run_cv, CapacityOptions, GapOptions,
    RunConfig, TrainError,
};

#[derive(Parser)]
#[command(name = "ugcn", version, about = "Unified graph convolution training and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// K-fold cross-validation training; exports the metrics JSON.
    Train(TrainArgs),
    /// Run the layer/decomposition equivalence suite.
    Verify(VerifyArgs),
    /// Final training accuracy versus training fraction, all four models.
    Capacity(CapacityArgs),
    /// Train/validation loss curves on a 90/10 split, all four models.
    Gap(GapArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory holding the TU-format files.
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset name (file prefix), e.g. MUTAG.
    #[arg(long)]
    name: String,
    #[arg(long, value_parser = ["gcn", "gat", "sugcn", "gugcn"])]
    model: String,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep attention unnormalized in S-UGC/G-UGC (this is the default;
    /// the flag exists to state it explicitly).
    #[arg(long = "no-softmax", conflicts_with = "softmax")]
    no_softmax: bool,
    /// Normalize S-UGC/G-UGC attention with softmax + LeakyReLU.
    #[arg(long)]
    softmax: bool,
    /// Degree clamp for datasets without node labels.
    #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
    degree_cap: usize,
    /// Output path for the metrics JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    name: String,
    /// Training fractions in (0, 1], comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
    degree_cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    name: String,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
    degree_cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Numeric(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Numeric(_) => 3,
        }
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => AppError::Data(d),
            TrainError::Graph(g) => AppError::Numeric(g.to_string()),
            TrainError::Numeric(msg) => AppError::Numeric(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Capacity(args) => cmd_capacity(args),
        Command::Gap(args) => cmd_gap(args),
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let config = RunConfig {
        model: ModelKind::from_str(&args.model).expect("clap restricted the values"),
        hidden: args.hidden,
        blocks: args.blocks,
        heads: args.heads,
        batch_size: args.batch_size,
        dropout: args.dropout,
        lr: args.lr,
        epochs: args.epochs,
        folds: args.folds,
        seed: args.seed,
        normalize_attention: args.softmax,
        skip_sum: true,
        degree_cap: args.degree_cap,
    };
    let ds = load_dataset(&args.dataset, &args.name, args.degree_cap)?;
    eprintln!(
        "{}: {} graphs, {} classes, feature width {}",
        args.name,
        ds.graphs.len(),
        ds.num_classes,
        ds.graphs[0].node_features().ncols()
    );
    let report = run_cv(&ds.graphs, ds.num_classes, &config, &args.name)?;
    export_metrics(&report, &args.out)?;
    println!(
        "{} {}: mean_acc {:.4} std {:.4} best_epoch {} ({}/{} folds) -> {}",
        args.name,
        args.model,
        report.summary.mean_acc,
        report.summary.std_acc,
        report.summary.best_epoch,
        report.summary.completed_folds,
        config.folds,
        args.out.display()
    );
    if report.summary.completed_folds < config.folds {
        return Err(AppError::Numeric(format!(
            "{} of {} folds aborted; see {}",
            config.folds - report.summary.completed_folds,
            config.folds,
            args.out.display()
        )));
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), AppError> {
    let report = dsconv_oracle::run_verification(args.trials, args.seed);
    for check in &report.checks {
        let bound = if check.must_exceed {
            format!("required > {:.0e}", check.threshold)
        } else {
            format!("allowed <= {:.0e}", check.threshold)
        };
        let verdict = if check.passed() { "pass" } else { "FAIL" };
        println!("{:<28} deviation {:>12.3e}  {:<18} [{verdict}]", check.name, check.deviation, bound);
    }
    if report.all_passed() {
        println!("verification passed ({} trials, seed {})", report.trials, report.seed);
        Ok(())
    } else {
        Err(AppError::Numeric("verification failed; see deviations above".into()))
    }
}

fn cmd_capacity(args: CapacityArgs) -> Result<(), AppError> {
    check_ratios(&args.ratios)?;
    let opts = CapacityOptions {
        ratios: args.ratios,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let ds = load_dataset(&args.dataset, &args.name, args.degree_cap)?;
    let report = capacity_probe(&ds.graphs, ds.num_classes, &opts, &args.name)?;
    export_metrics(&report, &args.out)?;
    println!("capacity probe: {} rows -> {}", report.rows.len(), args.out.display());
    Ok(())
}

fn cmd_gap(args: GapArgs) -> Result<(), AppError> {
    let opts = GapOptions {
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        hidden: args.hidden,
        blocks: args.blocks,
        heads: args.heads,
        dropout: args.dropout,
        lr: args.lr,
    };
    let ds = load_dataset(&args.dataset, &args.name, args.degree_cap)?;
    let report = generalization_probe(&ds.graphs, ds.num_classes, &opts, &args.name)?;
    export_metrics(&report, &args.out)?;
    for curve in &report.models {
        println!("gap {}: mean over last 50 epochs = {:+.4}", curve.model, curve.mean_gap_last_50);
    }
    println!("gap probe -> {}", args.out.display());
    Ok(())
}

fn check_ratios(ratios: &[f64]) -> Result<(), AppError> {
    if ratios.is_empty() {
        return Err(AppError::Usage("--ratios needs at least one value".into()));
    }
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(AppError::Usage(format!("ratio {r} outside (0, 1]")));
        }
    }
    Ok(())
}
