use crate::autodiff::{Tape, Var};
use crate::data::TrainBatch;
use crate::error::{Error, Result};
use crate::model::{transfer::score_rows, Bound, EmbeddingState, Model};

/// Hinge sums per (source channel, target behavior), `[K + 1][K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairLoss {
    pub sum: Vec<Vec<f64>>,
    pub count: Vec<Vec<usize>>,
}

impl PairLoss {
    pub fn zeros(behaviors: usize) -> Self {
        Self {
            sum: vec![vec![0.0; behaviors]; behaviors + 1],
            count: vec![vec![0; behaviors]; behaviors + 1],
        }
    }

    pub fn accumulate(&mut self, other: &PairLoss) {
        for (row, orow) in self.sum.iter_mut().zip(&other.sum) {
            for (a, b) in row.iter_mut().zip(orow) {
                *a += b;
            }
        }
        for (row, orow) in self.count.iter_mut().zip(&other.count) {
            for (a, b) in row.iter_mut().zip(orow) {
                *a += b;
            }
        }
    }
}

pub struct LossOutput {
    pub loss: Var,
    pub hinge: f64,
    pub regularization: f64,
    pub pairs: PairLoss,
    /// Per tuple, in batch order: hinge summed over sources.
    pub per_tuple: Vec<f64>,
}

/// `max(0, 1 - pos + neg)` elementwise.
pub fn hinge(tape: &mut Tape, pos: Var, neg: Var) -> Result<Var> {
    let diff = tape.sub(neg, pos)?;
    let margin = tape.offset(diff, 1.0);
    Ok(tape.leaky_relu(margin, 0.0))
}

/// Source channels scored for a given target behavior.
pub fn loss_sources(model: &Model) -> Vec<usize> {
    if model.config.ablation.no_mtask {
        vec![model.fused()]
    } else {
        (0..=model.fused()).collect()
    }
}

/// Pairwise hinge loss summed over tuples and sources, plus `lambda` times the
/// squared norm of every bound parameter.
pub fn batch_loss(
    tape: &mut Tape,
    bound: &Bound,
    state: &EmbeddingState,
    model: &Model,
    batch: &TrainBatch,
    lambda: f64,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::Data("empty training batch".into()));
    }
    let k = model.behaviors;
    let sources = loss_sources(model);
    let mut pairs = PairLoss::zeros(k);
    let mut per_tuple = vec![0.0; batch.len()];
    let mut terms = Vec::new();
    for target in 0..k {
        let idx: Vec<usize> = (0..batch.len()).filter(|&t| batch.tuples[t].behavior == target).collect();
        if idx.is_empty() {
            continue;
        }
        let users: Vec<usize> = idx.iter().map(|&t| batch.tuples[t].user).collect();
        let pos: Vec<usize> = idx.iter().map(|&t| batch.tuples[t].positive).collect();
        let neg: Vec<usize> = idx.iter().map(|&t| batch.tuples[t].negative).collect();
        let pos_scores = score_rows(tape, bound, state, model, &users, &pos, target, &sources)?;
        let neg_scores = score_rows(tape, bound, state, model, &users, &neg, target, &sources)?;
        for ((&s, &p), &n) in sources.iter().zip(&pos_scores).zip(&neg_scores) {
            let h = hinge(tape, p, n)?;
            for (row, &t) in tape.value(h).data().iter().zip(&idx) {
                per_tuple[t] += row;
            }
            pairs.sum[s][target] += tape.value(h).data().iter().sum::<f64>();
            pairs.count[s][target] += idx.len();
            terms.push(tape.sum(h));
        }
    }
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    let hinge_value = tape.value(total).item();

    let mut regularization = 0.0;
    if lambda != 0.0 {
        let mut norm = None;
        for &v in bound.vars() {
            let sq = tape.squared_norm(v);
            norm = Some(match norm {
                None => sq,
                Some(acc) => tape.add(acc, sq)?,
            });
        }
        if let Some(norm) = norm {
            let reg = tape.scale(norm, lambda);
            regularization = tape.value(reg).item();
            total = tape.add(total, reg)?;
        }
    }
    Ok(LossOutput {
        loss: total,
        hinge: hinge_value,
        regularization,
        pairs,
        per_tuple,
    })
}
