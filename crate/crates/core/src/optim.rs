//! Adam, the seeded mini-batch training loop, early stopping and best-
//! checkpoint selection.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FeatureDataset, Split};
use crate::error::{Error, Result};
use crate::heads::{
    head_backward, head_forward, head_init, predict, softmax_cross_entropy, HeadKind, ProbeHead,
};
use crate::kan::{precompute_basis_cache_with_budget, BasisCache, DEFAULT_CACHE_BUDGET_BYTES};
use crate::matrix::Matrix;
use crate::spline::{build_knot_grid, KnotGrid};

/// Flat view over a parameter (or gradient) set, tensor by tensor in a fixed
/// declared order.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed moments congruent with `params`, default constants.
    pub fn new(params: &impl ParamTensors) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        AdamState {
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut impl ParamTensors,
    grads: &impl ParamTensors,
    learning_rate: f64,
) -> Result<()> {
    if learning_rate.is_nan() || learning_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate {learning_rate} must be positive"
        )));
    }
    let grads = grads.tensors();
    let mut params = params.tensors_mut();
    if grads.len() != params.len() || params.len() != state.first_moment.len() {
        return Err(Error::DimensionMismatch {
            context: "adam tensor count",
            expected: state.first_moment.len(),
            found: grads.len().min(params.len()),
        });
    }
    for ((p, g), m) in params.iter().zip(&grads).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::DimensionMismatch {
                context: "adam tensor length",
                expected: m.len(),
                found: if p.len() != m.len() { p.len() } else { g.len() },
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_MAX_EPOCHS: usize = 50;
pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_GRID_RANGE: (f64, f64) = (-2.0, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub head: HeadKind,
    /// KAN grid intervals `G`; ignored for linear heads.
    pub grid_size: usize,
    /// KAN spline degree `k`; ignored for linear heads.
    pub degree: usize,
    pub grid_range: (f64, f64),
    /// Reshuffle the train split every epoch.
    pub shuffle: bool,
    pub cache_budget_bytes: u128,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            early_stop_patience: DEFAULT_PATIENCE,
            seed: 0,
            head: HeadKind::Kan,
            grid_size: 5,
            degree: 3,
            grid_range: DEFAULT_GRID_RANGE,
            shuffle: true,
            cache_budget_bytes: DEFAULT_CACHE_BUDGET_BYTES,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "max epochs must be at least 1".into(),
            ));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::InvalidArgument("patience must be at least 1".into()));
        }
        if self.head == HeadKind::Kan {
            self.grid()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<KnotGrid> {
        build_knot_grid(
            self.grid_size,
            self.degree,
            self.grid_range.0,
            self.grid_range.1,
        )
    }

    /// Seed for head initialization.
    pub fn init_seed(&self) -> u64 {
        mix_seed(self.seed, u64::MAX)
    }

    /// Seed for the shuffle of 1-based `epoch`.
    pub fn shuffle_seed(&self, epoch: usize) -> u64 {
        mix_seed(self.seed, epoch as u64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(seed ^ splitmix64(stream))`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Train-split order used in 1-based `epoch`.
pub fn epoch_order(config: &TrainConfig, n_train: usize, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_train).collect();
    if config.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.shuffle_seed(epoch)));
    }
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub param_count: usize,
    /// Best checkpoint evaluated on the test split, when one exists.
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

impl RunMetrics {
    pub fn best_record(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// Train minus validation accuracy at the best epoch.
    pub fn generalization_gap(&self) -> f64 {
        let r = self.best_record();
        r.train_accuracy - r.val_accuracy
    }

    /// Equality ignoring wall-clock timings.
    pub fn same_numbers(&self, other: &RunMetrics) -> bool {
        let strip = |m: &RunMetrics| {
            let mut m = m.clone();
            m.epochs.iter_mut().for_each(|e| e.wall_time_secs = 0.0);
            m
        };
        strip(self) == strip(other)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub head: ProbeHead,
    pub metrics: RunMetrics,
}

/// Loss and accuracy of `head` on a labeled feature matrix.
pub fn evaluate(head: &ProbeHead, features: &Matrix, labels: &[usize]) -> Result<(f64, f64)> {
    evaluate_cached(head, features, labels, None)
}

pub fn evaluate_cached(
    head: &ProbeHead,
    features: &Matrix,
    labels: &[usize],
    cache: Option<&BasisCache>,
) -> Result<(f64, f64)> {
    let logits = head_forward(head, features, cache)?;
    let (loss, _) = softmax_cross_entropy(&logits, labels)?;
    let correct = predict(&logits)
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok((loss, correct as f64 / labels.len() as f64))
}

struct SplitData {
    features: Matrix,
    labels: Vec<usize>,
    cache: Option<BasisCache>,
}

impl SplitData {
    fn new(
        ds: &FeatureDataset,
        split: Split,
        grid: Option<&KnotGrid>,
        budget: u128,
    ) -> Result<Self> {
        let (features, labels) = ds.split_view(split);
        let cache = match grid {
            Some(g) if !labels.is_empty() => {
                match precompute_basis_cache_with_budget(g, &features, budget) {
                    Ok(c) => Some(c),
                    Err(Error::MemoryBudget { .. }) => None,
                    Err(e) => return Err(e),
                }
            }
            _ => None,
        };
        Ok(SplitData {
            features,
            labels,
            cache,
        })
    }

    fn evaluate(&self, head: &ProbeHead) -> Result<(f64, f64)> {
        evaluate_cached(head, &self.features, &self.labels, self.cache.as_ref())
    }
}

/// Trains a freshly initialized head.
pub fn train(dataset: &FeatureDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_sink(dataset, config, &mut |_| {})
}

pub fn train_with_sink(
    dataset: &FeatureDataset,
    config: &TrainConfig,
    sink: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let grid = match config.head {
        HeadKind::Kan => Some(config.grid()?),
        HeadKind::Linear => None,
    };
    let head = head_init(
        config.head,
        dataset.dim(),
        dataset.n_classes(),
        grid.as_ref(),
        config.init_seed(),
    )?;
    train_from(dataset, config, head, sink)
}

/// Trains starting from the given parameters.
///
/// Each epoch shuffles the train split with [`TrainConfig::shuffle_seed`],
/// takes one Adam step per batch (the final partial batch included), then
/// evaluates the full train and validation splits. A copy of the parameters
/// is kept whenever validation loss strictly improves; training stops after
/// `max_epochs` or once `early_stop_patience` epochs pass without improvement.
pub fn train_from(
    dataset: &FeatureDataset,
    config: &TrainConfig,
    mut head: ProbeHead,
    sink: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if head.d_in() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            context: "head input width",
            expected: dataset.dim(),
            found: head.d_in(),
        });
    }
    if head.d_out() < dataset.n_classes() {
        return Err(Error::DimensionMismatch {
            context: "head class count",
            expected: dataset.n_classes(),
            found: head.d_out(),
        });
    }
    let grid = head.grid().cloned();
    let budget = config.cache_budget_bytes;
    let train = SplitData::new(dataset, Split::Train, grid.as_ref(), budget)?;
    let val = SplitData::new(dataset, Split::Val, grid.as_ref(), budget)?;
    if train.labels.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val.labels.is_empty() {
        return Err(Error::EmptySplit("val"));
    }

    let mut adam = AdamState::new(&head);
    let mut best = head.clone();
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut epochs = Vec::new();

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let order = epoch_order(config, train.labels.len(), epoch);
        for batch in order.chunks(config.batch_size) {
            let xb = train.features.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&s| train.labels[s]).collect();
            let cb = train.cache.as_ref().map(|c| c.select_rows(batch));
            let logits = head_forward(&head, &xb, cb.as_ref())?;
            let (_, dlogits) = softmax_cross_entropy(&logits, &yb)?;
            let grads = head_backward(&head, &xb, &dlogits, cb.as_ref())?;
            adam_step(&mut adam, &mut head, &grads, config.learning_rate)?;
        }
        let (train_loss, train_accuracy) = train.evaluate(&head)?;
        let (val_loss, val_accuracy) = val.evaluate(&head)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        sink(&record);
        epochs.push(record);
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best = head.clone();
        }
        // best_epoch stays 0 while the loss is NaN
        if epoch - best_epoch >= config.early_stop_patience {
            break;
        }
    }
    if best_epoch == 0 {
        return Err(Error::InvalidArgument(
            "validation loss never became finite".into(),
        ));
    }

    let (test_loss, test_accuracy) = if dataset.split_count(Split::Test) > 0 {
        let test = SplitData::new(dataset, Split::Test, grid.as_ref(), budget)?;
        let (l, a) = test.evaluate(&best)?;
        (Some(l), Some(a))
    } else {
        (None, None)
    };

    let metrics = RunMetrics {
        epochs_run: epochs.len(),
        epochs,
        best_epoch,
        best_val_loss,
        param_count: best.param_count(),
        test_loss,
        test_accuracy,
    };
    Ok(TrainOutcome {
        head: best,
        metrics,
    })
}
