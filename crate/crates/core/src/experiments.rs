//! Sweeps over grid size and spline degree, paired KAN-vs-linear comparison,
//! aggregation and metric export.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::heads::{HeadKind, ProbeHead};
use crate::optim::{train, EpochRecord, RunMetrics, TrainConfig};
use crate::spline::build_knot_grid;

/// What the per-epoch mean and standard deviation are taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggregationMode {
    /// One series per `(G, k)`, averaged over seeds.
    OverSeeds,
    /// One series per grid size, averaged over degrees and seeds.
    OverDegrees,
    /// One series per degree, averaged over grid sizes and seeds.
    OverGridSizes,
}

impl AggregationMode {
    pub const ALL: [AggregationMode; 3] = [
        AggregationMode::OverSeeds,
        AggregationMode::OverDegrees,
        AggregationMode::OverGridSizes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::OverSeeds => "over_seeds",
            AggregationMode::OverDegrees => "over_degrees",
            AggregationMode::OverGridSizes => "over_grid_sizes",
        }
    }

    /// Human-readable description used in figure titles.
    pub fn describe(self) -> &'static str {
        match self {
            AggregationMode::OverSeeds => "mean over seeds",
            AggregationMode::OverDegrees => "mean over degrees and seeds",
            AggregationMode::OverGridSizes => "mean over grid sizes and seeds",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AggregationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown aggregation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid_sizes: Vec<usize>,
    pub degrees: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Shared by every run; head kind, grid size, degree and seed are
    /// overridden per run.
    pub base: TrainConfig,
    pub aggregation: AggregationMode,
    /// Concurrent runs; 0 uses the rayon default.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid_sizes: vec![3, 5, 10, 20],
            degrees: vec![1, 2, 3],
            seeds: vec![1, 2, 3],
            base: TrainConfig::default(),
            aggregation: AggregationMode::OverDegrees,
            workers: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_sizes.is_empty() || self.degrees.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "grid sizes, degrees and seeds must be non-empty".into(),
            ));
        }
        let (lo, hi) = self.base.grid_range;
        for &g in &self.grid_sizes {
            for &k in &self.degrees {
                build_knot_grid(g, k, lo, hi)?;
            }
        }
        Ok(())
    }

    /// Every run in export order: KAN by `(G, k, seed)`, then linear by seed.
    /// Repeated seeds give repeated runs.
    pub fn run_keys(&self) -> Vec<RunKey> {
        let mut keys = Vec::new();
        for &g in &self.grid_sizes {
            for &k in &self.degrees {
                for &seed in &self.seeds {
                    keys.push(RunKey::kan(g, k, seed));
                }
            }
        }
        for &seed in &self.seeds {
            keys.push(RunKey::linear(seed));
        }
        keys.sort();
        keys
    }

    pub fn train_config(&self, key: &RunKey) -> TrainConfig {
        let mut c = self.base.clone();
        c.head = key.head;
        c.seed = key.seed;
        if let (Some(g), Some(k)) = (key.grid_size, key.degree) {
            c.grid_size = g;
            c.degree = k;
        }
        c
    }
}

/// Identity of one training run. Orders KAN runs first by `(G, k, seed)`,
/// then linear runs by seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub head: HeadKind,
    pub grid_size: Option<usize>,
    pub degree: Option<usize>,
    pub seed: u64,
}

impl RunKey {
    pub fn kan(grid_size: usize, degree: usize, seed: u64) -> Self {
        RunKey {
            head: HeadKind::Kan,
            grid_size: Some(grid_size),
            degree: Some(degree),
            seed,
        }
    }

    pub fn linear(seed: u64) -> Self {
        RunKey {
            head: HeadKind::Linear,
            grid_size: None,
            degree: None,
            seed,
        }
    }

    fn sort_key(&self) -> (u8, usize, usize, u64) {
        let rank = match self.head {
            HeadKind::Kan => 0,
            HeadKind::Linear => 1,
        };
        (
            rank,
            self.grid_size.unwrap_or(0),
            self.degree.unwrap_or(0),
            self.seed,
        )
    }

    pub fn label(&self) -> String {
        match (self.grid_size, self.degree) {
            (Some(g), Some(k)) => format!("kan G={g} k={k} seed={}", self.seed),
            _ => format!("linear seed={}", self.seed),
        }
    }
}

impl Ord for RunKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for RunKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub key: RunKey,
    pub metrics: RunMetrics,
    /// Best-checkpoint parameters; absent when loaded from a metrics file.
    pub head: Option<ProbeHead>,
}

/// Per-epoch statistics of one group of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub epoch: usize,
    /// Runs that reached this epoch.
    pub count: usize,
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

/// Metric order inside [`AggregatePoint`] arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TrainLoss = 0,
    TrainAccuracy = 1,
    ValLoss = 2,
    ValAccuracy = 3,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::TrainLoss,
        Metric::TrainAccuracy,
        Metric::ValLoss,
        Metric::ValAccuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::TrainLoss => "train_loss",
            Metric::TrainAccuracy => "train_accuracy",
            Metric::ValLoss => "val_loss",
            Metric::ValAccuracy => "val_accuracy",
        }
    }

    pub fn of(self, r: &EpochRecord) -> f64 {
        match self {
            Metric::TrainLoss => r.train_loss,
            Metric::TrainAccuracy => r.train_accuracy,
            Metric::ValLoss => r.val_loss,
            Metric::ValAccuracy => r.val_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    /// `over_seeds`, `over_degrees`, `over_grid_sizes`, or `linear`.
    pub family: String,
    /// Group label such as `G=5`, `k=3`, `G=5 k=3` or `linear`.
    pub group: String,
    pub points: Vec<AggregatePoint>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Successful runs in [`RunKey`] order.
    pub runs: Vec<RunRecord>,
    /// Runs that failed, with the error message.
    pub failures: Vec<(RunKey, String)>,
    pub aggregation: AggregationMode,
    /// Series under `aggregation`, plus the linear baseline.
    pub aggregates: Vec<AggregateSeries>,
}

impl SweepResult {
    pub fn from_runs(mut runs: Vec<RunRecord>, aggregation: AggregationMode) -> Self {
        runs.sort_by_key(|r| r.key);
        let mut result = SweepResult {
            runs,
            failures: Vec::new(),
            aggregation,
            aggregates: Vec::new(),
        };
        result.aggregates = result.aggregate(aggregation);
        result.aggregates.extend(result.linear_aggregate());
        result
    }

    pub fn run(&self, key: &RunKey) -> Option<&RunRecord> {
        self.runs.iter().find(|r| &r.key == key)
    }

    pub fn kan_runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.key.head == HeadKind::Kan)
    }

    pub fn linear_runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.key.head == HeadKind::Linear)
    }

    /// KAN series grouped as `mode` prescribes, in ascending group order.
    pub fn aggregate(&self, mode: AggregationMode) -> Vec<AggregateSeries> {
        let mut groups: BTreeMap<(usize, usize), (String, Vec<&RunMetrics>)> = BTreeMap::new();
        for r in self.kan_runs() {
            let (g, k) = (r.key.grid_size.unwrap_or(0), r.key.degree.unwrap_or(0));
            let (key, label) = match mode {
                AggregationMode::OverSeeds => ((g, k), format!("G={g} k={k}")),
                AggregationMode::OverDegrees => ((g, 0), format!("G={g}")),
                AggregationMode::OverGridSizes => ((k, 0), format!("k={k}")),
            };
            groups
                .entry(key)
                .or_insert_with(|| (label, Vec::new()))
                .1
                .push(&r.metrics);
        }
        groups
            .into_values()
            .map(|(group, runs)| AggregateSeries {
                family: mode.as_str().to_owned(),
                group,
                points: aggregate_runs(&runs),
            })
            .collect()
    }

    /// Linear baseline averaged over seeds, if any linear runs exist.
    pub fn linear_aggregate(&self) -> Option<AggregateSeries> {
        let runs: Vec<&RunMetrics> = self.linear_runs().map(|r| &r.metrics).collect();
        if runs.is_empty() {
            return None;
        }
        Some(AggregateSeries {
            family: "linear".into(),
            group: "linear".into(),
            points: aggregate_runs(&runs),
        })
    }

    /// Every aggregate family written by [`export_metrics`].
    pub fn all_aggregates(&self) -> Vec<AggregateSeries> {
        let mut out: Vec<AggregateSeries> = AggregationMode::ALL
            .into_iter()
            .flat_map(|m| self.aggregate(m))
            .collect();
        out.extend(self.linear_aggregate());
        out
    }

    /// `(G, k)` whose runs have the highest mean best val accuracy; ties go to
    /// the first configuration in key order.
    pub fn best_kan_config(&self) -> Option<(usize, usize)> {
        let mut by_config: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for r in self.kan_runs() {
            by_config
                .entry((r.key.grid_size.unwrap_or(0), r.key.degree.unwrap_or(0)))
                .or_default()
                .push(best_val_accuracy(&r.metrics));
        }
        let mut best: Option<((usize, usize), f64)> = None;
        for (cfg, accs) in by_config {
            let m = mean(&accs);
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((cfg, m));
            }
        }
        best.map(|(cfg, _)| cfg)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-epoch mean and population standard deviation over the runs that
/// reached each epoch. Runs that stopped early contribute nothing afterwards.
pub fn aggregate_runs(runs: &[&RunMetrics]) -> Vec<AggregatePoint> {
    let len = runs.iter().map(|r| r.epochs.len()).max().unwrap_or(0);
    (0..len)
        .map(|e| {
            let present: Vec<&EpochRecord> = runs.iter().filter_map(|r| r.epochs.get(e)).collect();
            let count = present.len();
            let mut m = [0.0; 4];
            let mut s = [0.0; 4];
            for metric in Metric::ALL {
                let vals: Vec<f64> = present.iter().map(|r| metric.of(r)).collect();
                // Shifted by the first value so identical runs give exactly zero spread.
                let shift = vals[0];
                let dev: Vec<f64> = vals.iter().map(|v| v - shift).collect();
                let dm = mean(&dev);
                let var = dev.iter().map(|d| (d - dm) * (d - dm)).sum::<f64>() / count as f64;
                m[metric as usize] = shift + dm;
                s[metric as usize] = var.sqrt();
            }
            AggregatePoint {
                epoch: e + 1,
                count,
                mean: m,
                std: s,
            }
        })
        .collect()
}

/// Highest validation accuracy over the recorded epochs.
pub fn best_val_accuracy(metrics: &RunMetrics) -> f64 {
    metrics
        .epochs
        .iter()
        .map(|e| e.val_accuracy)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Trains one KAN head per `(G, k, seed)` and one linear head per seed.
///
/// Runs execute on up to `workers` threads. A failing run is recorded in
/// `failures` and does not stop the others.
pub fn run_sweep(dataset: &FeatureDataset, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let keys = config.run_keys();
    let job = |key: &RunKey| -> (RunKey, Result<crate::optim::TrainOutcome>) {
        (*key, train(dataset, &config.train_config(key)))
    };
    let outcomes: Vec<_> = if config.workers == 1 {
        keys.iter().map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| keys.par_iter().map(job).collect())
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (key, outcome) in outcomes {
        match outcome {
            Ok(o) => runs.push(RunRecord {
                key,
                metrics: o.metrics,
                head: Some(o.head),
            }),
            Err(e) => failures.push((
                key,
                Error::RunFailed {
                    config: key.label(),
                    source: Box::new(e),
                }
                .to_string(),
            )),
        }
    }
    let mut result = SweepResult::from_runs(runs, config.aggregation);
    result.failures = failures;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadSummary {
    pub best_val_accuracy: f64,
    pub val_accuracy_at_best: f64,
    pub best_val_loss: f64,
    pub epochs_to_best: usize,
    pub epochs_run: usize,
    pub param_count: usize,
}

impl HeadSummary {
    pub fn of(metrics: &RunMetrics) -> Self {
        HeadSummary {
            best_val_accuracy: best_val_accuracy(metrics),
            val_accuracy_at_best: metrics.best_record().val_accuracy,
            best_val_loss: metrics.best_val_loss,
            epochs_to_best: metrics.best_epoch,
            epochs_run: metrics.epochs_run,
            param_count: metrics.param_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub seed: u64,
    pub kan: HeadSummary,
    pub linear: HeadSummary,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub grid_size: usize,
    pub degree: usize,
    pub entries: Vec<ComparisonEntry>,
    /// The underlying runs, for export and figures.
    pub sweep: SweepResult,
}

impl Comparison {
    fn mean_of(&self, f: impl Fn(&ComparisonEntry) -> f64) -> f64 {
        mean(&self.entries.iter().map(f).collect::<Vec<_>>())
    }

    pub fn mean_best_val_accuracy(&self) -> (f64, f64) {
        (
            self.mean_of(|e| e.kan.best_val_accuracy),
            self.mean_of(|e| e.linear.best_val_accuracy),
        )
    }

    pub fn mean_best_val_loss(&self) -> (f64, f64) {
        (
            self.mean_of(|e| e.kan.best_val_loss),
            self.mean_of(|e| e.linear.best_val_loss),
        )
    }

    pub fn mean_epochs_to_best(&self) -> (f64, f64) {
        (
            self.mean_of(|e| e.kan.epochs_to_best as f64),
            self.mean_of(|e| e.linear.epochs_to_best as f64),
        )
    }

    /// Plain-text table of per-seed and mean results.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "seed,head,best_val_accuracy,val_accuracy_at_best,best_val_loss,epochs_to_best,epochs_run,param_count"
        );
        for e in &self.entries {
            for (name, s) in [("kan", &e.kan), ("linear", &e.linear)] {
                let _ = writeln!(
                    out,
                    "{},{name},{},{},{},{},{},{}",
                    e.seed,
                    s.best_val_accuracy,
                    s.val_accuracy_at_best,
                    s.best_val_loss,
                    s.epochs_to_best,
                    s.epochs_run,
                    s.param_count
                );
            }
        }
        let (ka, la) = self.mean_best_val_accuracy();
        let (kl, ll) = self.mean_best_val_loss();
        let (ke, le) = self.mean_epochs_to_best();
        let _ = writeln!(out, "mean,kan,{ka},,{kl},{ke},,");
        let _ = writeln!(out, "mean,linear,{la},,{ll},{le},,");
        out
    }
}

/// Paired KAN and linear runs: for each seed both heads see the same
/// shuffles, since shuffle order depends only on the seed and epoch.
pub fn compare_heads(
    dataset: &FeatureDataset,
    train_config: &TrainConfig,
    grid_size: usize,
    degree: usize,
    seeds: &[u64],
    workers: usize,
) -> Result<Comparison> {
    let sweep_config = SweepConfig {
        grid_sizes: vec![grid_size],
        degrees: vec![degree],
        seeds: seeds.to_vec(),
        base: train_config.clone(),
        aggregation: AggregationMode::OverSeeds,
        workers,
    };
    let sweep = run_sweep(dataset, &sweep_config)?;
    if let Some((key, msg)) = sweep.failures.first() {
        return Err(Error::RunFailed {
            config: key.label(),
            source: Box::new(Error::InvalidArgument(msg.clone())),
        });
    }
    let mut seeds_sorted = seeds.to_vec();
    seeds_sorted.sort_unstable();
    seeds_sorted.dedup();
    let entries = seeds_sorted
        .iter()
        .map(|&seed| {
            let kan = sweep
                .run(&RunKey::kan(grid_size, degree, seed))
                .expect("kan run");
            let lin = sweep.run(&RunKey::linear(seed)).expect("linear run");
            ComparisonEntry {
                seed,
                kan: HeadSummary::of(&kan.metrics),
                linear: HeadSummary::of(&lin.metrics),
            }
        })
        .collect();
    Ok(Comparison {
        grid_size,
        degree,
        entries,
        sweep,
    })
}

const RUNS_HEADER: &str =
    "head,grid_size,degree,seed,epoch,train_loss,train_accuracy,val_loss,val_accuracy";
const SUMMARY_HEADER: &str = "head,grid_size,degree,seed,epochs_run,best_epoch,best_val_loss,best_val_accuracy,train_accuracy_at_best,val_accuracy_at_best,generalization_gap,test_loss,test_accuracy,param_count";

fn opt_usize(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders the metrics file: a `# runs` table with one row per run and
/// epoch, a `# summary` table with one row per run, and an `# aggregates`
/// table with every aggregate series. Wall-clock times are omitted so the
/// output depends only on the numbers.
pub fn render_metrics(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str("# runs\n");
    out.push_str(RUNS_HEADER);
    out.push('\n');
    for r in &result.runs {
        let k = &r.key;
        for e in &r.metrics.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                k.head,
                opt_usize(k.grid_size),
                opt_usize(k.degree),
                k.seed,
                e.epoch,
                e.train_loss,
                e.train_accuracy,
                e.val_loss,
                e.val_accuracy
            );
        }
    }
    out.push_str("\n# summary\n");
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in &result.runs {
        let k = &r.key;
        let m = &r.metrics;
        let best = m.best_record();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            k.head,
            opt_usize(k.grid_size),
            opt_usize(k.degree),
            k.seed,
            m.epochs_run,
            m.best_epoch,
            m.best_val_loss,
            best_val_accuracy(m),
            best.train_accuracy,
            best.val_accuracy,
            m.generalization_gap(),
            opt_f64(m.test_loss),
            opt_f64(m.test_accuracy),
            m.param_count
        );
    }
    out.push_str("\n# aggregates\n");
    out.push_str("family,group,epoch,count");
    for metric in Metric::ALL {
        let _ = write!(out, ",{0}_mean,{0}_std", metric.name());
    }
    out.push('\n');
    for series in result.all_aggregates() {
        for p in &series.points {
            let _ = write!(
                out,
                "{},{},{},{}",
                series.family, series.group, p.epoch, p.count
            );
            for i in 0..4 {
                let _ = write!(out, ",{},{}", p.mean[i], p.std[i]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn export_metrics(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_metrics(result))?;
    Ok(())
}

/// Rebuilds runs from a metrics file written by [`export_metrics`]. Summary
/// rows pair with runs in order. The aggregates section is recomputed.
pub fn parse_metrics(text: &str, aggregation: AggregationMode) -> Result<SweepResult> {
    let mut section = "";
    let mut epochs: Vec<(RunKey, Vec<EpochRecord>)> = Vec::new();
    let mut summaries: Vec<(RunKey, Vec<&str>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let bad = |what: &str| Error::Malformed(format!("metrics line {}: {what}", lineno + 1));
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix("# ") {
            section = match name {
                "runs" => "runs",
                "summary" => "summary",
                "aggregates" => "aggregates",
                _ => return Err(bad("unknown section")),
            };
            continue;
        }
        if line.starts_with("head,") || line.starts_with("family,") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse_key = |cols: &[&str]| -> Result<RunKey> {
            let head: HeadKind = cols[0].parse().map_err(|_| bad("head"))?;
            let seed = cols[3].parse().map_err(|_| bad("seed"))?;
            Ok(match head {
                HeadKind::Kan => RunKey::kan(
                    cols[1].parse().map_err(|_| bad("grid_size"))?,
                    cols[2].parse().map_err(|_| bad("degree"))?,
                    seed,
                ),
                HeadKind::Linear => RunKey::linear(seed),
            })
        };
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad("number"));
        match section {
            "runs" => {
                if cols.len() != 9 {
                    return Err(bad("expected 9 columns"));
                }
                let key = parse_key(&cols)?;
                let epoch: usize = cols[4].parse().map_err(|_| bad("epoch"))?;
                match epochs.last_mut() {
                    Some((k, _)) if *k == key && epoch != 1 => {}
                    _ => epochs.push((key, Vec::new())),
                }
                epochs.last_mut().expect("pushed").1.push(EpochRecord {
                    epoch,
                    train_loss: f(cols[5])?,
                    train_accuracy: f(cols[6])?,
                    val_loss: f(cols[7])?,
                    val_accuracy: f(cols[8])?,
                    wall_time_secs: 0.0,
                });
            }
            "summary" => {
                if cols.len() != 14 {
                    return Err(bad("expected 14 columns"));
                }
                summaries.push((parse_key(&cols)?, cols));
            }
            "aggregates" => {}
            _ => return Err(bad("data outside a section")),
        }
    }
    if epochs.len() != summaries.len() {
        return Err(Error::Malformed(format!(
            "{} runs but {} summary rows",
            epochs.len(),
            summaries.len()
        )));
    }
    let mut runs = Vec::new();
    for ((key, records), (summary_key, cols)) in epochs.into_iter().zip(summaries) {
        if key != summary_key {
            return Err(Error::Malformed(format!(
                "no summary row for {}",
                key.label()
            )));
        }
        let num = |i: usize| cols[i].parse::<usize>();
        let opt = |i: usize| -> Result<Option<f64>> {
            if cols[i].is_empty() {
                Ok(None)
            } else {
                cols[i]
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Malformed("summary number".into()))
            }
        };
        let bad = |_| Error::Malformed(format!("summary row for {}", key.label()));
        let metrics = RunMetrics {
            epochs_run: num(4).map_err(bad)?,
            best_epoch: num(5).map_err(bad)?,
            best_val_loss: cols[6]
                .parse()
                .map_err(|_| Error::Malformed("best_val_loss".into()))?,
            param_count: num(13).map_err(bad)?,
            test_loss: opt(11)?,
            test_accuracy: opt(12)?,
            epochs: records,
        };
        if metrics.epochs.len() != metrics.epochs_run
            || metrics.best_epoch == 0
            || metrics.best_epoch > metrics.epochs_run
        {
            return Err(Error::Malformed(format!(
                "inconsistent epoch counts for {}",
                key.label()
            )));
        }
        runs.push(RunRecord {
            key,
            metrics,
            head: None,
        });
    }
    Ok(SweepResult::from_runs(runs, aggregation))
}

pub fn load_metrics(path: impl AsRef<Path>, aggregation: AggregationMode) -> Result<SweepResult> {
    parse_metrics(&fs::read_to_string(path)?, aggregation)
}
