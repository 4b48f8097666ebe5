use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Exclusion;
use crate::error::{Error, Result};
use crate::train::EpochLog;

/// HR and NDCG per cutoff, aligned with [`EvalReport::cutoffs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
}

impl Metrics {
    pub(crate) fn accumulator(n: usize) -> Self {
        Self {
            hr: vec![0.0; n],
            ndcg: vec![0.0; n],
        }
    }

    pub(crate) fn finish(&mut self, users: usize) {
        if users == 0 {
            return;
        }
        for v in self.hr.iter_mut().chain(self.ndcg.iter_mut()) {
            *v /= users as f64;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub min: usize,
    pub max: Option<usize>,
    pub users: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cutoffs: Vec<usize>,
    pub evaluated: usize,
    pub overall: Metrics,
    pub buckets: Vec<BucketReport>,
    pub excluded: BTreeMap<Exclusion, usize>,
}

impl EvalReport {
    /// HR at cutoff `n`, if reported.
    pub fn hr_at(&self, n: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == n).map(|i| self.overall.hr[i])
    }

    pub fn ndcg_at(&self, n: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == n).map(|i| self.overall.ndcg[i])
    }

    /// Single-line JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let header: String = self.cutoffs.iter().map(|n| format!("  HR@{n:<3} NDCG@{n:<3}")).collect();
        let _ = writeln!(out, "{:<14}{:>6}{header}", "users", "n");
        let row = |out: &mut String, label: &str, n: usize, m: &Metrics| {
            let cells: String = m.hr.iter().zip(&m.ndcg).map(|(h, g)| format!("  {h:.4} {g:.4}  ")).collect();
            let _ = writeln!(out, "{label:<14}{n:>6}{cells}");
        };
        row(&mut out, "all", self.evaluated, &self.overall);
        for b in &self.buckets {
            let label = match b.max {
                Some(max) => format!("[{}, {}]", b.min, max),
                None => format!("[{}, inf)", b.min),
            };
            row(&mut out, &label, b.users, &b.metrics);
        }
        for (reason, n) in &self.excluded {
            let _ = writeln!(out, "excluded {reason:?}: {n}");
        }
        out
    }
}

/// Mean per-(source, target) hinge loss from one epoch of training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyReport {
    pub epoch: u64,
    /// Behavior names followed by `fused`.
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    /// `matrix[source][target]`; `None` where that pair was never scored.
    pub matrix: Vec<Vec<Option<f64>>>,
    /// Tracked users' hinge sums for that epoch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<(usize, f64)>,
}

/// Uses the last epoch in `logs`.
pub fn dependency_report(logs: &[EpochLog], behaviors: &[String]) -> Result<DependencyReport> {
    let last = logs.last().ok_or_else(|| Error::Data("dependency report needs a completed epoch".into()))?;
    if last.pair_loss_sum.len() != behaviors.len() + 1 {
        return Err(Error::Data(format!(
            "log has {} source rows for {} behaviors",
            last.pair_loss_sum.len(),
            behaviors.len()
        )));
    }
    let matrix = last
        .pair_loss_sum
        .iter()
        .zip(&last.pair_count)
        .map(|(s, c)| s.iter().zip(c).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect())
        .collect();
    let mut sources = behaviors.to_vec();
    sources.push("fused".into());
    Ok(DependencyReport {
        epoch: last.epoch,
        sources,
        targets: behaviors.to_vec(),
        matrix,
        users: last.tracked.clone(),
    })
}
