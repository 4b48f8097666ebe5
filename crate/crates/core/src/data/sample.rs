use rand::Rng;

use crate::data::SplitDataset;
use crate::seed::{rng_for, STREAM_SAMPLE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainTuple {
    pub user: usize,
    /// Behavior being predicted.
    pub behavior: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainBatch {
    pub tuples: Vec<TrainTuple>,
}

impl TrainBatch {
    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }
}

/// Samples `samples` (positive, negative) pairs per user and target behavior.
///
/// Positives are drawn with replacement from the user's train events under
/// that behavior; negatives uniformly from items without such an event.
/// `salt` distinguishes repeated draws under one seed (e.g. the step).
pub fn sample_batch(
    split: &SplitDataset,
    users: &[usize],
    targets: &[usize],
    samples: usize,
    seed: u64,
    salt: u64,
) -> TrainBatch {
    let graph = &split.train_graph;
    let num_items = graph.num_items();
    let mut tuples = Vec::with_capacity(users.len() * targets.len() * samples);
    for &user in users {
        for &behavior in targets {
            let positives = graph.layer(behavior).user_items(user);
            if positives.is_empty() || positives.len() == num_items {
                continue;
            }
            let mut rng = rng_for(seed, &[STREAM_SAMPLE, salt, user as u64, behavior as u64]);
            for _ in 0..samples {
                let positive = positives[rng.random_range(0..positives.len())];
                let negative = loop {
                    let j = rng.random_range(0..num_items);
                    if positives.binary_search(&j).is_err() {
                        break j;
                    }
                };
                tuples.push(TrainTuple {
                    user,
                    behavior,
                    positive,
                    negative,
                });
            }
        }
    }
    TrainBatch { tuples }
}
