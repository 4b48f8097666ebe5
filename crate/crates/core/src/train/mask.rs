use serde::{Deserialize, Serialize};

use crate::data::{build_graphs, SplitDataset};
use crate::error::{Error, Result};

/// Context behaviors removed from training for a context-drop run.
///
/// The test set is left alone so masked and unmasked runs are ranked on the
/// same held-out items and negatives.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorMask {
    /// Behavior names to drop.
    pub drop: Vec<String>,
    /// Drop every context behavior, keeping only the target.
    pub target_only: bool,
}

impl BehaviorMask {
    /// Parses `view,cart`, `-view,-cart` or `+buy-only`.
    pub fn parse(spec: &str) -> Self {
        let mut mask = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.starts_with('+') && part.ends_with("-only") {
                mask.target_only = true;
            } else {
                mask.drop.push(part.trim_start_matches('-').to_string());
            }
        }
        mask
    }

    pub fn is_empty(&self) -> bool {
        self.drop.is_empty() && !self.target_only
    }

    pub fn label(&self, target: &str) -> String {
        if self.target_only {
            return format!("+{target}-only");
        }
        self.drop.iter().map(|d| format!("-{d}")).collect::<Vec<_>>().join(",")
    }
}

/// Removes the masked behaviors from the training side of `split`.
pub fn apply_mask(split: &SplitDataset, mask: &BehaviorMask) -> Result<SplitDataset> {
    if mask.is_empty() {
        return Ok(split.clone());
    }
    let train = &split.train;
    for name in &mask.drop {
        if train.behavior_index(name).is_none() {
            return Err(Error::Config(format!("cannot drop unknown behavior {name:?}")));
        }
    }
    let keep: Vec<usize> = (0..train.num_behaviors())
        .filter(|&k| {
            if mask.target_only {
                k == train.target()
            } else {
                !mask.drop.contains(&train.behaviors()[k])
            }
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Config("behavior mask drops every behavior".into()));
    }
    let train = train.select_behaviors(&keep)?;
    Ok(SplitDataset {
        train_graph: build_graphs(&train),
        train,
        test: split.test.clone(),
        excluded: split.excluded.clone(),
    })
}
