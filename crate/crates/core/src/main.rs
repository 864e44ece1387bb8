use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kanprobe::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use kanprobe::data::{
    gen_synthetic, load_dataset, save_dataset, standardize, Split, StandardizationStats,
    SyntheticKind,
};
use kanprobe::experiments::{
    compare_heads, load_metrics, render_metrics, run_sweep, AggregationMode, RunKey, RunRecord,
    SweepConfig, SweepResult,
};
use kanprobe::figures::{emit_figure, FigureKind};
use kanprobe::heads::HeadKind;
use kanprobe::optim::{
    train_with_sink, EpochRecord, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_GRID_RANGE,
    DEFAULT_LEARNING_RATE, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE,
};
use kanprobe::Error;

/// KAN and linear probing heads over frozen features.
#[derive(Debug, Parser)]
#[command(name = "kanprobe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic feature dataset.
    Gen(GenArgs),
    /// Train one probing head.
    Train(TrainArgs),
    /// Train every (grid size, degree, seed) KAN head plus linear baselines.
    Sweep(SweepArgs),
    /// Paired KAN and linear runs over several seeds.
    Compare(CompareArgs),
    /// Draw one figure from a metrics file.
    Plot(PlotArgs),
    /// Print the header of a dataset or the metadata of a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Label rule: linear, rings or additive_poly.
    #[arg(long)]
    kind: SyntheticKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    classes: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Optimizer and schedule flags shared by train, sweep and compare.
#[derive(Debug, Args)]
struct Schedule {
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
    max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    #[arg(long, default_value_t = DEFAULT_PATIENCE)]
    patience: usize,
    /// Lower end of the spline grid range.
    #[arg(long, default_value_t = DEFAULT_GRID_RANGE.0, allow_negative_numbers = true)]
    grid_lo: f64,
    /// Upper end of the spline grid range.
    #[arg(long, default_value_t = DEFAULT_GRID_RANGE.1, allow_negative_numbers = true)]
    grid_hi: f64,
}

impl Schedule {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            early_stop_patience: self.patience,
            grid_range: (self.grid_lo, self.grid_hi),
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "kan")]
    head: HeadKind,
    /// Grid size G.
    #[arg(long, default_value_t = 5)]
    grid: usize,
    /// Spline degree k.
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    schedule: Schedule,
    #[arg(long)]
    out_metrics: Option<PathBuf>,
    #[arg(long)]
    out_checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,20")]
    grids: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    degrees: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// over_seeds, over_degrees or over_grid_sizes.
    #[arg(long, default_value = "over_degrees")]
    aggregation: AggregationMode,
    /// Concurrent runs; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    schedule: Schedule,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    grid: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    schedule: Schedule,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    metrics: PathBuf,
    /// val_acc_by_grid, val_loss_by_grid, train_loss_by_grid, val_acc_by_k or kan_vs_linear.
    #[arg(long)]
    kind: FigureKind,
    #[arg(long, default_value = "over_degrees")]
    aggregation: AggregationMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct InspectArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
enum Failure {
    Data(Error),
    Runtime(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Data(e) | Failure::Runtime(e) => e,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn data<T>(r: kanprobe::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Data)
}

fn runtime<T>(r: kanprobe::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| {
        if e.is_format_error() {
            Failure::Data(e)
        } else {
            Failure::Runtime(e)
        }
    })
}

fn load_standardized(
    path: &Path,
) -> std::result::Result<(kanprobe::data::FeatureDataset, StandardizationStats), Failure> {
    let ds = data(load_dataset(path))?;
    data(standardize(&ds))
}

fn log_epoch(prefix: &str, r: &EpochRecord) {
    println!(
        "{prefix}epoch {} train_loss={:.6} train_acc={:.4} val_loss={:.6} val_acc={:.4}",
        r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
    );
}

fn checkpoint_meta(
    record: &RunRecord,
    config: &TrainConfig,
    stats: &StandardizationStats,
    provenance: &str,
) -> Option<(kanprobe::heads::ProbeHead, CheckpointMeta)> {
    let head = record.head.clone()?;
    let mut meta = CheckpointMeta::for_run(&head, config, &record.metrics);
    meta.standardization = Some(stats.clone());
    meta.extra
        .insert("provenance".into(), provenance.replace(['\n', '\r'], " "));
    Some((head, meta))
}

fn write(path: &Path, text: &str) -> Outcome {
    runtime(fs::write(path, text).map_err(Error::from))
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let ds = runtime(gen_synthetic(a.kind, a.n, a.d, a.classes, a.noise, a.seed))?;
    runtime(save_dataset(&ds, &a.out))?;
    println!(
        "wrote {} (n={} d={} classes={})",
        a.out.display(),
        ds.len(),
        ds.dim(),
        ds.n_classes()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let (ds, stats) = load_standardized(&a.data)?;
    let config = TrainConfig {
        head: a.head,
        grid_size: a.grid,
        degree: a.degree,
        seed: a.seed,
        ..a.schedule.config()
    };
    let outcome = runtime(train_with_sink(&ds, &config, &mut |r| log_epoch("", r)))?;
    let m = &outcome.metrics;
    println!(
        "best_epoch={} best_val_loss={} epochs_run={} params={}",
        m.best_epoch, m.best_val_loss, m.epochs_run, m.param_count
    );
    if let (Some(loss), Some(acc)) = (m.test_loss, m.test_accuracy) {
        println!("test_loss={loss} test_acc={acc}");
    }
    let key = match a.head {
        HeadKind::Kan => RunKey::kan(a.grid, a.degree, a.seed),
        HeadKind::Linear => RunKey::linear(a.seed),
    };
    let record = RunRecord {
        key,
        metrics: outcome.metrics,
        head: Some(outcome.head),
    };
    if let Some(path) = &a.out_checkpoint {
        let (head, meta) =
            checkpoint_meta(&record, &config, &stats, ds.provenance()).expect("head");
        runtime(save_checkpoint(&head, &meta, path))?;
    }
    if let Some(path) = &a.out_metrics {
        let result = SweepResult::from_runs(vec![record], AggregationMode::OverSeeds);
        write(path, &render_metrics(&result))?;
    }
    Ok(())
}

fn checkpoint_name(key: &RunKey) -> String {
    match (key.grid_size, key.degree) {
        (Some(g), Some(k)) => format!("kan_G{g}_k{k}_seed{}.kanc", key.seed),
        _ => format!("linear_seed{}.kanc", key.seed),
    }
}

fn write_sweep_outputs(
    result: &SweepResult,
    sweep: &SweepConfig,
    stats: &StandardizationStats,
    provenance: &str,
    dir: &Path,
    figures: &[FigureKind],
) -> Outcome {
    let ckpt_dir = dir.join("checkpoints");
    runtime(fs::create_dir_all(&ckpt_dir).map_err(Error::from))?;
    write(&dir.join("metrics.csv"), &render_metrics(result))?;
    for r in &result.runs {
        if let Some((head, meta)) =
            checkpoint_meta(r, &sweep.train_config(&r.key), stats, provenance)
        {
            runtime(save_checkpoint(
                &head,
                &meta,
                ckpt_dir.join(checkpoint_name(&r.key)),
            ))?;
        }
    }
    for &kind in figures {
        runtime(emit_figure(result, kind, dir.join(format!("{kind}.svg"))))?;
    }
    Ok(())
}

fn report_failures(result: &SweepResult) -> Outcome {
    for (_, msg) in &result.failures {
        eprintln!("error: {msg}");
    }
    match result.failures.first() {
        Some((key, msg)) => Err(Failure::Runtime(Error::RunFailed {
            config: key.label(),
            source: Box::new(Error::InvalidArgument(msg.clone())),
        })),
        None => Ok(()),
    }
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let (ds, stats) = load_standardized(&a.data)?;
    let sweep = SweepConfig {
        grid_sizes: a.grids,
        degrees: a.degrees,
        seeds: a.seeds,
        base: a.schedule.config(),
        aggregation: a.aggregation,
        workers: a.workers,
    };
    println!("sweep: {} runs", sweep.run_keys().len());
    let result = runtime(run_sweep(&ds, &sweep))?;
    for r in &result.runs {
        let m = &r.metrics;
        println!(
            "{}: best_epoch={} best_val_loss={} epochs_run={}",
            r.key.label(),
            m.best_epoch,
            m.best_val_loss,
            m.epochs_run
        );
    }
    let figures: &[FigureKind] = if result.runs.is_empty() {
        &[]
    } else {
        &FigureKind::ALL
    };
    write_sweep_outputs(
        &result,
        &sweep,
        &stats,
        ds.provenance(),
        &a.out_dir,
        figures,
    )?;
    report_failures(&result)
}

fn cmd_compare(a: CompareArgs) -> Outcome {
    let (ds, stats) = load_standardized(&a.data)?;
    let base = a.schedule.config();
    let cmp = runtime(compare_heads(
        &ds, &base, a.grid, a.degree, &a.seeds, a.workers,
    ))?;
    let table = cmp.to_table();
    print!("{table}");
    let sweep = SweepConfig {
        grid_sizes: vec![a.grid],
        degrees: vec![a.degree],
        seeds: a.seeds,
        base,
        aggregation: AggregationMode::OverSeeds,
        workers: a.workers,
    };
    write_sweep_outputs(
        &cmp.sweep,
        &sweep,
        &stats,
        ds.provenance(),
        &a.out_dir,
        &[FigureKind::KanVsLinear],
    )?;
    write(&a.out_dir.join("comparison.csv"), &table)
}

fn cmd_plot(a: PlotArgs) -> Outcome {
    let result = data(load_metrics(&a.metrics, a.aggregation))?;
    runtime(emit_figure(&result, a.kind, &a.out))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Outcome {
    if let Some(path) = a.data {
        let ds = data(load_dataset(&path))?;
        println!("format=KANF version=1");
        println!("n={}", ds.len());
        println!("d={}", ds.dim());
        println!("classes={}", ds.n_classes());
        println!(
            "splits train={} val={} test={}",
            ds.split_count(Split::Train),
            ds.split_count(Split::Val),
            ds.split_count(Split::Test)
        );
        println!("provenance={}", ds.provenance());
    } else if let Some(path) = a.checkpoint {
        let (head, meta) = data(load_checkpoint(&path))?;
        println!("format=KANC");
        print!("{}", meta.to_text());
        println!("parameters={}", head.param_count());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error());
            ExitCode::from(f.code())
        }
    }
}
