use rand::seq::{IndexedRandom, IteratorRandom};

use crate::data::{build_graphs, BehaviorGraph, Event, InteractionTensor};
use crate::error::Result;
use crate::seed::{rng_for, STREAM_SPLIT};

/// Number of sampled non-interacted items paired with each held-out item.
pub const EVAL_NEGATIVES: usize = 99;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCase {
    pub user: usize,
    pub item: usize,
    pub negatives: Vec<usize>,
}

impl TestCase {
    /// Held-out item followed by its negatives.
    pub fn candidates(&self) -> Vec<usize> {
        std::iter::once(self.item).chain(self.negatives.iter().copied()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    /// Fewer than two target-behavior events.
    TooFewTargetEvents,
    /// Fewer never-interacted items than required negatives.
    TooFewNegatives,
}

#[derive(Clone, Debug)]
pub struct SplitDataset {
    pub train: InteractionTensor,
    pub train_graph: BehaviorGraph,
    /// Sorted by user.
    pub test: Vec<TestCase>,
    pub excluded: Vec<(usize, Exclusion)>,
}

impl SplitDataset {
    /// Train events per user, all behaviors.
    pub fn train_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.train.num_users()];
        for e in self.train.events() {
            counts[e.user] += 1;
        }
        counts
    }
}

/// Leave-one-out split on the target behavior.
///
/// Users with at least two target events lose their latest one to the test
/// set; ties and missing timestamps fall back to a seeded choice. Negatives
/// are drawn from items the user never touched under any behavior.
pub fn leave_one_out_split(t: &InteractionTensor, seed: u64) -> Result<SplitDataset> {
    let full_graph = build_graphs(t);
    let target = t.target();
    let mut per_user: Vec<Vec<&Event>> = vec![Vec::new(); t.num_users()];
    for e in t.events_for(target) {
        per_user[e.user].push(e);
    }

    let mut held_out = Vec::new();
    let mut test = Vec::new();
    let mut excluded = Vec::new();
    for (user, events) in per_user.iter().enumerate() {
        if events.len() < 2 {
            excluded.push((user, Exclusion::TooFewTargetEvents));
            continue;
        }
        let mut rng = rng_for(seed, &[STREAM_SPLIT, user as u64]);
        let touched = touched_items(&full_graph, user);
        let available = t.num_items() - touched.len();
        if available < EVAL_NEGATIVES {
            log::warn!("user {user}: only {available} never-interacted items, excluded from evaluation");
            excluded.push((user, Exclusion::TooFewNegatives));
            continue;
        }
        let latest = events.iter().map(|e| e.timestamp).max().flatten();
        let candidates: Vec<&&Event> = events.iter().filter(|e| e.timestamp == latest).collect();
        let chosen = **candidates.choose(&mut rng).expect("non-empty");

        let mut negatives = (0..t.num_items())
            .filter(|i| touched.binary_search(i).is_err())
            .choose_multiple(&mut rng, EVAL_NEGATIVES);
        negatives.sort_unstable();
        held_out.push(*chosen);
        test.push(TestCase {
            user,
            item: chosen.item,
            negatives,
        });
    }
    held_out.sort();
    let train_events = t
        .events()
        .iter()
        .filter(|e| held_out.binary_search(e).is_err())
        .copied()
        .collect();
    let train = t.with_events(train_events)?;
    let train_graph = build_graphs(&train);
    Ok(SplitDataset {
        train,
        train_graph,
        test,
        excluded,
    })
}

/// Sorted items the user interacted with under any behavior.
fn touched_items(graph: &BehaviorGraph, user: usize) -> Vec<usize> {
    let mut items: Vec<usize> = graph.layers().iter().flat_map(|l| l.user_items(user).iter().copied()).collect();
    items.sort_unstable();
    items.dedup();
    items
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(user: usize, item: usize, behavior: usize, ts: Option<i64>) -> Event {
        Event {
            user,
            item,
            behavior,
            timestamp: ts,
        }
    }

    fn tensor(items: usize, events: Vec<Event>) -> InteractionTensor {
        let users = events.iter().map(|e| e.user).max().unwrap() + 1;
        InteractionTensor::new(users, items, vec!["view".into(), "buy".into()], 1, events).unwrap()
    }

    #[test]
    fn holds_out_latest_timestamp() {
        let t = tensor(
            200,
            vec![ev(0, 5, 1, Some(1)), ev(0, 7, 1, Some(3)), ev(0, 6, 1, Some(2)), ev(0, 9, 0, Some(4))],
        );
        let split = leave_one_out_split(&t, 1).unwrap();
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.test[0].item, 7);
        assert!(!split.train.contains(0, 7, 1));
        assert!(split.train.contains(0, 5, 1));
        assert_eq!(split.test[0].negatives.len(), EVAL_NEGATIVES);
        for n in &split.test[0].negatives {
            assert!(![5, 6, 7, 9].contains(n));
        }
    }

    #[test]
    fn single_target_event_stays_in_train() {
        let t = tensor(200, vec![ev(0, 3, 1, None), ev(0, 4, 0, None)]);
        let split = leave_one_out_split(&t, 1).unwrap();
        assert!(split.test.is_empty());
        assert_eq!(split.excluded, vec![(0, Exclusion::TooFewTargetEvents)]);
        assert!(split.train.contains(0, 3, 1));
    }

    #[test]
    fn too_few_negatives_excludes_user() {
        // 150 items, 60 touched: only 90 candidates for 99 negatives.
        let events: Vec<Event> = (0..60).map(|i| ev(0, i, if i < 2 { 1 } else { 0 }, None)).collect();
        let split = leave_one_out_split(&tensor(150, events), 3).unwrap();
        assert!(split.test.is_empty());
        assert_eq!(split.excluded, vec![(0, Exclusion::TooFewNegatives)]);
        assert_eq!(split.train.event_count(), 60);
    }

    #[test]
    fn missing_timestamps_use_seeded_choice() {
        let t = tensor(300, (0..6).map(|i| ev(0, i * 10, 1, None)).collect());
        let a = leave_one_out_split(&t, 11).unwrap();
        let b = leave_one_out_split(&t, 11).unwrap();
        assert_eq!(a.test, b.test);
        let picks: std::collections::HashSet<usize> =
            (0..40).map(|s| leave_one_out_split(&t, s).unwrap().test[0].item).collect();
        assert!(picks.len() > 1, "holdout should vary with the seed");
    }
}
