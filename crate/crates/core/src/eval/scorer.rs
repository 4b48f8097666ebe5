use rand::Rng;

use crate::autodiff::{Tape, Tensor};
use crate::data::{SplitDataset, TestCase};
use crate::error::Result;
use crate::model::{transfer::score_rows, EmbeddingState, Model, ParamStore};
use crate::seed::rng_for;

/// Scores the candidates of each case (held-out item first).
pub trait Scorer: Sync {
    fn score_cases(&self, cases: &[TestCase]) -> Result<Vec<Vec<f64>>>;
}

/// Trained model, target behavior, fused source channel.
pub struct ModelScorer<'a> {
    model: &'a Model,
    params: &'a ParamStore,
    readout_users: Vec<Tensor>,
    readout_items: Vec<Tensor>,
    target: usize,
}

impl<'a> ModelScorer<'a> {
    /// Runs propagation once; scoring then reuses the readouts.
    pub fn new(model: &'a Model, params: &'a ParamStore, split: &SplitDataset) -> Result<Self> {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let state = model.embed(&mut tape, &bound, &split.train_graph)?;
        Ok(Self {
            model,
            params,
            readout_users: state.readout_users.iter().map(|&v| tape.value(v).clone()).collect(),
            readout_items: state.readout_items.iter().map(|&v| tape.value(v).clone()).collect(),
            target: split.train.target(),
        })
    }
}

impl Scorer for ModelScorer<'_> {
    fn score_cases(&self, cases: &[TestCase]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let state = EmbeddingState {
            layers: Vec::new(),
            readout_users: self.readout_users.iter().map(|t| tape.constant(t.clone())).collect(),
            readout_items: self.readout_items.iter().map(|t| tape.constant(t.clone())).collect(),
        };
        let (mut users, mut items) = (Vec::new(), Vec::new());
        for case in cases {
            for item in case.candidates() {
                users.push(case.user);
                items.push(item);
            }
        }
        let scores = score_rows(&mut tape, &bound, &state, self.model, &users, &items, self.target, &[self.model.fused()])?;
        let flat = tape.value(scores[0]).data();
        let mut out = Vec::with_capacity(cases.len());
        let mut at = 0;
        for case in cases {
            let n = case.negatives.len() + 1;
            out.push(flat[at..at + n].to_vec());
            at += n;
        }
        Ok(out)
    }
}

/// Train-interaction count of the item under the target behavior.
pub struct PopularityScorer {
    counts: Vec<f64>,
}

impl PopularityScorer {
    pub fn new(split: &SplitDataset) -> Self {
        let mut counts = vec![0.0; split.train.num_items()];
        for e in split.train.events_for(split.train.target()) {
            counts[e.item] += 1.0;
        }
        Self { counts }
    }

    pub fn from_counts(counts: Vec<f64>) -> Self {
        Self { counts }
    }
}

impl Scorer for PopularityScorer {
    fn score_cases(&self, cases: &[TestCase]) -> Result<Vec<Vec<f64>>> {
        Ok(cases
            .iter()
            .map(|c| c.candidates().iter().map(|&i| self.counts[i]).collect())
            .collect())
    }
}

/// Same score for every item; ranking falls back to the id tie-break.
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score_cases(&self, cases: &[TestCase]) -> Result<Vec<Vec<f64>>> {
        Ok(cases.iter().map(|c| vec![self.0; c.negatives.len() + 1]).collect())
    }
}

/// Independent uniform scores, seeded per user.
pub struct RandomScorer(pub u64);

impl Scorer for RandomScorer {
    fn score_cases(&self, cases: &[TestCase]) -> Result<Vec<Vec<f64>>> {
        Ok(cases
            .iter()
            .map(|c| {
                let mut rng = rng_for(self.0, &[c.user as u64]);
                (0..=c.negatives.len()).map(|_| rng.random::<f64>()).collect()
            })
            .collect())
    }
}
