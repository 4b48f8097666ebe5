use rand::Rng;

use super::{batch_loss, TrainConfig};
use crate::autodiff::{finite_diff_check_many, GradCheckReport, Tensor};
use crate::data::{build_graphs, sample_batch, Event, InteractionTensor, SplitDataset};
use crate::error::Result;
use crate::model::{Model, ModelConfig};
use crate::seed::{rng_for, STREAM_SYNTH};

pub const SUITE_STEP: f64 = 1e-5;
pub const SUITE_TOLERANCE: f64 = 1e-4;

/// Tiny seeded instance for the end-to-end gradient check: 6 users, 6 items,
/// 3 behaviors, `d = 4`, `d' = 2`, 2 heads, 2 layers, `lambda = 0.001`.
pub fn suite_instance(seed: u64) -> Result<(SplitDataset, TrainConfig)> {
    let (users, items, k) = (6, 6, 3);
    let mut rng = rng_for(seed, &[STREAM_SYNTH, 0x6772_6164]);
    let mut events = Vec::new();
    for behavior in 0..k {
        for user in 0..users {
            for item in 0..items {
                // Every user keeps at least one event and one non-event per behavior.
                let forced = item == (user + behavior) % items;
                let barred = item == (user + behavior + 3) % items;
                if forced || (!barred && rng.random_bool(0.3)) {
                    events.push(Event { user, item, behavior, timestamp: None });
                }
            }
        }
    }
    let names = vec!["view".to_string(), "cart".to_string(), "buy".to_string()];
    let train = InteractionTensor::new(users, items, names, k - 1, events)?;
    let split = SplitDataset {
        train_graph: build_graphs(&train),
        train,
        test: Vec::new(),
        excluded: Vec::new(),
    };
    let mut config = TrainConfig::new(seed);
    config.model = ModelConfig {
        dim: 4,
        low_rank_dim: 2,
        heads: 2,
        layers: 2,
        ..ModelConfig::default()
    };
    config.lambda = 0.001;
    config.samples = 1;
    Ok((split, config))
}

/// Central finite differences of the full objective against the analytic
/// gradient, over every parameter coordinate.
pub fn loss_gradient_check(seed: u64, step: f64, tol: f64) -> Result<GradCheckReport> {
    let (split, config) = suite_instance(seed)?;
    let model = Model::for_graph(config.model.clone(), &split.train_graph)?;
    let params = model.init_params(seed);
    let users: Vec<usize> = (0..split.train.num_users()).collect();
    let targets: Vec<usize> = (0..model.behaviors).collect();
    let batch = sample_batch(&split, &users, &targets, config.samples, seed, 0);
    let tensors: Vec<Tensor> = params.tensors().to_vec();
    finite_diff_check_many(
        |tape, vars| {
            let bound = params.bound_from(vars.to_vec());
            let state = model.embed(tape, &bound, &split.train_graph)?;
            Ok(batch_loss(tape, &bound, &state, &model, &batch, config.lambda)?.loss)
        },
        &tensors,
        step,
        tol,
    )
}
