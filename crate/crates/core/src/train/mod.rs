//! Optimization of the pairwise hinge objective with Adam.

mod adam;
mod checkpoint;
mod loss;
mod mask;
mod suite;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, BETA1, BETA2, EPSILON};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{batch_loss, hinge, loss_sources, LossOutput, PairLoss};
pub use mask::{apply_mask, BehaviorMask};
pub use suite::{loss_gradient_check, suite_instance, SUITE_STEP, SUITE_TOLERANCE};

use crate::autodiff::{Tape, Tensor};
use crate::data::{sample_batch, SplitDataset};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ParamStore};
use crate::seed::{rng_for, STREAM_SHUFFLE};

pub const LAMBDA_GRID: [f64; 6] = [0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001];
pub const BATCH_GRID: [usize; 4] = [32, 128, 256, 512];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    /// Weight of the squared parameter norm in the loss.
    pub lambda: f64,
    /// Users per optimizer step.
    pub batch_size: usize,
    /// Positive/negative pairs per user and target behavior.
    pub samples: usize,
    pub epochs: usize,
    pub seed: u64,
    pub mask: BehaviorMask,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            model: ModelConfig::default(),
            learning_rate: 1e-3,
            lr_decay: 0.96,
            lambda: 0.001,
            batch_size: 32,
            samples: 2,
            epochs: 30,
            seed,
            mask: BehaviorMask::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.samples == 0 {
            return Err(Error::Config("batch size and samples per user must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.lr_decay > 0.0 && self.lambda >= 0.0) {
            return Err(Error::Config("learning rate, decay and lambda must be non-negative".into()));
        }
        if !LAMBDA_GRID.contains(&self.lambda) {
            log::warn!("lambda {} is outside the usual grid {:?}", self.lambda, LAMBDA_GRID);
        }
        if !BATCH_GRID.contains(&self.batch_size) {
            log::warn!("batch size {} is outside the usual grid {:?}", self.batch_size, BATCH_GRID);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ParamStore,
    pub adam_m: Vec<Tensor>,
    pub adam_v: Vec<Tensor>,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Completed epochs.
    pub epoch: u64,
    /// Learning rate for the next epoch.
    pub lr: f64,
    /// Best (epoch, HR@10) seen, when evaluation runs between epochs.
    pub best: Option<(u64, f64)>,
}

impl TrainState {
    pub fn new(model: &Model, config: &TrainConfig) -> Self {
        let params = model.init_params(config.seed);
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            params,
            adam_m: zeros.clone(),
            adam_v: zeros,
            step: 0,
            epoch: 0,
            lr: config.learning_rate,
            best: None,
        }
    }

    /// Bitwise equality of parameters, moments and counters.
    pub fn same_bits(&self, other: &TrainState) -> bool {
        let bits = |ts: &[Tensor]| ts.iter().flat_map(|t| t.data().iter().map(|x| x.to_bits())).collect::<Vec<_>>();
        self.params.same_bits(&other.params)
            && bits(&self.adam_m) == bits(&other.adam_m)
            && bits(&self.adam_v) == bits(&other.adam_v)
            && self.step == other.step
            && self.epoch == other.epoch
            && self.lr.to_bits() == other.lr.to_bits()
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: u64,
    pub lr: f64,
    /// Mean over batches of the full objective.
    pub mean_loss: f64,
    pub mean_hinge: f64,
    pub batches: usize,
    /// Hinge sums per `[source][target]`, sources `0..=K` with `K` the fused channel.
    pub pair_loss_sum: Vec<Vec<f64>>,
    pub pair_count: Vec<Vec<usize>>,
    /// `pair_loss_sum / pair_count`, `None` where nothing was scored.
    pub attribution: Vec<Vec<Option<f64>>>,
    /// Hinge sums per tracked user, summed over sources and targets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracked: Vec<(usize, f64)>,
}

/// Users with at least one train event under a scored target behavior.
pub fn trainable_users(split: &SplitDataset, model: &Model) -> Vec<usize> {
    let graph = &split.train_graph;
    let targets = epoch_targets(split, model);
    (0..graph.num_users())
        .filter(|&u| targets.iter().any(|&k| !graph.layer(k).user_items(u).is_empty()))
        .collect()
}

fn epoch_targets(split: &SplitDataset, model: &Model) -> Vec<usize> {
    if model.config.ablation.no_mtask {
        vec![split.train.target()]
    } else {
        (0..model.behaviors).collect()
    }
}

/// Runs one epoch: shuffled user batches, one Adam step each, then decays
/// the learning rate.
pub fn train_epoch(
    split: &SplitDataset,
    model: &Model,
    state: &mut TrainState,
    config: &TrainConfig,
    track: &[usize],
) -> Result<EpochLog> {
    let epoch = state.epoch + 1;
    let mut users = trainable_users(split, model);
    users.shuffle(&mut rng_for(config.seed, &[STREAM_SHUFFLE, epoch]));
    let targets = epoch_targets(split, model);

    let mut pairs = PairLoss::zeros(model.behaviors);
    let mut tracked: Vec<(usize, f64)> = track.iter().map(|&u| (u, 0.0)).collect();
    let (mut loss_sum, mut hinge_sum, mut batches) = (0.0, 0.0, 0usize);
    for (b, chunk) in users.chunks(config.batch_size).enumerate() {
        let batch = sample_batch(split, chunk, &targets, config.samples, config.seed, state.step);
        if batch.is_empty() {
            continue;
        }
        let mut tape = Tape::new();
        let bound = state.params.bind(&mut tape, true);
        let emb = model.embed(&mut tape, &bound, &split.train_graph)?;
        let out = batch_loss(&mut tape, &bound, &emb, model, &batch, config.lambda)?;
        let value = tape.value(out.loss).item();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {value} at epoch {epoch}, batch {b} (step {}, seed {})",
                state.step, config.seed
            )));
        }
        let grads = tape.backward(out.loss)?;
        state.step += 1;
        for (i, &v) in bound.vars().iter().enumerate() {
            let g = grads.get(v);
            adam_update(
                &mut state.params.tensors_mut()[i],
                &g,
                &mut state.adam_m[i],
                &mut state.adam_v[i],
                state.lr,
                state.step,
            );
        }
        for (slot, total) in tracked.iter_mut() {
            for (t, h) in batch.tuples.iter().zip(&out.per_tuple) {
                if t.user == *slot {
                    *total += h;
                }
            }
        }
        pairs.accumulate(&out.pairs);
        loss_sum += value;
        hinge_sum += out.hinge;
        batches += 1;
    }
    if batches == 0 {
        return Err(Error::Data("no user has a training event to sample".into()));
    }
    let log = EpochLog {
        epoch,
        lr: state.lr,
        mean_loss: loss_sum / batches as f64,
        mean_hinge: hinge_sum / batches as f64,
        batches,
        attribution: attribution(&pairs),
        pair_loss_sum: pairs.sum,
        pair_count: pairs.count,
        tracked,
    };
    state.epoch = epoch;
    state.lr *= config.lr_decay;
    log::info!("epoch {epoch}: mean loss {:.6} over {batches} batches", log.mean_loss);
    Ok(log)
}

pub fn attribution(pairs: &PairLoss) -> Vec<Vec<Option<f64>>> {
    pairs
        .sum
        .iter()
        .zip(&pairs.count)
        .map(|(s, c)| s.iter().zip(c).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect())
        .collect()
}

/// Builds the model for a split and trains for `config.epochs` epochs.
pub fn train(split: &SplitDataset, config: &TrainConfig) -> Result<(Model, TrainState, Vec<EpochLog>)> {
    config.validate()?;
    let model = Model::for_graph(config.model.clone(), &split.train_graph)?;
    let mut state = TrainState::new(&model, config);
    let mut logs = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        logs.push(train_epoch(split, &model, &mut state, config, &[])?);
    }
    Ok((model, state, logs))
}

#[cfg(test)]
mod tests;
