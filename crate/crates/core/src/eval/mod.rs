//! Leave-one-out ranking evaluation.

mod report;
mod scorer;

use rayon::prelude::*;

pub use report::{dependency_report, BucketReport, DependencyReport, EvalReport, Metrics};
pub use scorer::{ConstantScorer, ModelScorer, PopularityScorer, RandomScorer, Scorer};

use crate::data::{SplitDataset, TestCase, EVAL_NEGATIVES};
use crate::error::{Error, Result};

pub const CUTOFFS: [usize; 5] = [1, 3, 5, 7, 10];

/// Inclusive train-event ranges; `None` is open-ended.
pub const BUCKETS: [(usize, Option<usize>); 4] = [(1, Some(4)), (5, Some(12)), (13, Some(32)), (33, None)];

/// Cases scored per task; one tape is built per chunk.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub cutoffs: Vec<usize>,
    pub buckets: Vec<(usize, Option<usize>)>,
    /// Worker cap; `None` reads `MBGMN_THREADS`, falling back to all cores.
    pub threads: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            cutoffs: CUTOFFS.to_vec(),
            buckets: BUCKETS.to_vec(),
            threads: None,
        }
    }
}

/// `(hit, ndcg)` of a 1-based rank among `EVAL_NEGATIVES + 1` candidates at cutoff `n`.
pub fn rank_metrics(rank: usize, n: usize) -> Result<(f64, f64)> {
    if rank == 0 || rank > EVAL_NEGATIVES + 1 {
        return Err(Error::Data(format!("rank {rank} outside 1..={}", EVAL_NEGATIVES + 1)));
    }
    if rank > n {
        return Ok((0.0, 0.0));
    }
    Ok((1.0, 1.0 / ((rank + 1) as f64).log2()))
}

/// 1-based rank of `candidates[0]`, ordering by score descending then item id
/// ascending.
pub fn rank_of(candidates: &[usize], scores: &[f64]) -> usize {
    let (item, score) = (candidates[0], scores[0]);
    1 + candidates[1..]
        .iter()
        .zip(&scores[1..])
        .filter(|&(&c, &s)| s > score || (s == score && c < item))
        .count()
}

fn thread_cap(options: &EvalOptions) -> Option<usize> {
    options.threads.or_else(|| {
        std::env::var("MBGMN_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n: &usize| n > 0)
    })
}

/// Ranks of the held-out items, in test-case order.
pub fn rank_cases(cases: &[TestCase], scorer: &dyn Scorer, options: &EvalOptions) -> Result<Vec<usize>> {
    let run = || -> Result<Vec<usize>> {
        let chunks: Vec<Result<Vec<usize>>> = cases
            .par_chunks(CHUNK)
            .map(|chunk| {
                let scores = scorer.score_cases(chunk)?;
                Ok(chunk
                    .iter()
                    .zip(&scores)
                    .map(|(case, s)| rank_of(&case.candidates(), s))
                    .collect())
            })
            .collect();
        let mut ranks = Vec::with_capacity(cases.len());
        for c in chunks {
            ranks.extend(c?);
        }
        Ok(ranks)
    };
    match thread_cap(options) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Scores every test case and aggregates HR/NDCG overall and per sparsity
/// bucket of train-event counts (all behaviors).
pub fn evaluate(split: &SplitDataset, scorer: &dyn Scorer, options: &EvalOptions) -> Result<EvalReport> {
    evaluate_with_counts(split, scorer, options, &split.train_counts())
}

/// As [`evaluate`], bucketing users by the given per-user event counts.
pub fn evaluate_with_counts(
    split: &SplitDataset,
    scorer: &dyn Scorer,
    options: &EvalOptions,
    counts: &[usize],
) -> Result<EvalReport> {
    let ranks = rank_cases(&split.test, scorer, options)?;
    let mut overall = Metrics::accumulator(options.cutoffs.len());
    let mut buckets: Vec<BucketReport> = options
        .buckets
        .iter()
        .map(|&(min, max)| BucketReport {
            min,
            max,
            users: 0,
            metrics: Metrics::accumulator(options.cutoffs.len()),
        })
        .collect();
    for (case, &rank) in split.test.iter().zip(&ranks) {
        let count = counts[case.user];
        let mut bucket = buckets
            .iter_mut()
            .find(|b| count >= b.min && b.max.is_none_or(|m| count <= m));
        for (c, &n) in options.cutoffs.iter().enumerate() {
            let (hr, ndcg) = rank_metrics(rank, n)?;
            overall.hr[c] += hr;
            overall.ndcg[c] += ndcg;
            if let Some(b) = bucket.as_deref_mut() {
                b.metrics.hr[c] += hr;
                b.metrics.ndcg[c] += ndcg;
            }
        }
        if let Some(b) = bucket {
            b.users += 1;
        }
    }
    overall.finish(split.test.len());
    for b in &mut buckets {
        b.metrics.finish(b.users);
    }
    let mut excluded = std::collections::BTreeMap::new();
    for (_, reason) in &split.excluded {
        *excluded.entry(*reason).or_insert(0) += 1;
    }
    Ok(EvalReport {
        cutoffs: options.cutoffs.clone(),
        evaluated: split.test.len(),
        overall,
        buckets,
        excluded,
    })
}
