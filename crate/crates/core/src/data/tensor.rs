use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub user: usize,
    pub item: usize,
    pub behavior: usize,
    pub timestamp: Option<i64>,
}

/// Binary user × item × behavior tensor stored as a sorted event list.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionTensor {
    num_users: usize,
    num_items: usize,
    behaviors: Vec<String>,
    target: usize,
    events: Vec<Event>,
}

impl InteractionTensor {
    /// Validates indices and collapses duplicate (user, item, behavior)
    /// triples into one event, keeping the latest timestamp.
    pub fn new(
        num_users: usize,
        num_items: usize,
        behaviors: Vec<String>,
        target: usize,
        mut events: Vec<Event>,
    ) -> Result<Self> {
        if num_users == 0 || num_items == 0 || behaviors.is_empty() {
            return Err(Error::Data("tensor dimensions must be positive".into()));
        }
        if target >= behaviors.len() {
            return Err(Error::Data(format!("target index {target} out of range")));
        }
        for e in &events {
            if e.user >= num_users || e.item >= num_items || e.behavior >= behaviors.len() {
                return Err(Error::Data(format!("event {e:?} out of bounds")));
            }
        }
        events.sort_by_key(|e| (e.behavior, e.user, e.item, e.timestamp));
        // After sorting, the last duplicate carries the largest timestamp.
        let mut collapsed: Vec<Event> = Vec::with_capacity(events.len());
        for e in events {
            match collapsed.last_mut() {
                Some(last) if (last.behavior, last.user, last.item) == (e.behavior, e.user, e.item) => *last = e,
                _ => collapsed.push(e),
            }
        }
        Ok(Self {
            num_users,
            num_items,
            behaviors,
            target,
            events: collapsed,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_behaviors(&self) -> usize {
        self.behaviors.len()
    }

    pub fn behaviors(&self) -> &[String] {
        &self.behaviors
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn behavior_index(&self, name: &str) -> Option<usize> {
        self.behaviors.iter().position(|b| b == name)
    }

    /// Events sorted by (behavior, user, item).
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn events_for(&self, behavior: usize) -> impl Iterator<Item = &Event> {
        let lo = self.events.partition_point(|e| e.behavior < behavior);
        let hi = self.events.partition_point(|e| e.behavior <= behavior);
        self.events[lo..hi].iter()
    }

    pub fn contains(&self, user: usize, item: usize, behavior: usize) -> bool {
        self.events
            .binary_search_by_key(&(behavior, user, item), |e| (e.behavior, e.user, e.item))
            .is_ok()
    }

    /// Keeps only the listed behaviors (in the given order). The target must survive.
    pub fn select_behaviors(&self, keep: &[usize]) -> Result<Self> {
        let new_target = keep
            .iter()
            .position(|&k| k == self.target)
            .ok_or_else(|| Error::Config("behavior mask drops the target behavior".into()))?;
        let behaviors = keep.iter().map(|&k| self.behaviors[k].clone()).collect();
        let events = self
            .events
            .iter()
            .filter_map(|e| {
                keep.iter().position(|&k| k == e.behavior).map(|b| Event { behavior: b, ..*e })
            })
            .collect();
        Self::new(self.num_users, self.num_items, behaviors, new_target, events)
    }

    /// Replaces the event list, keeping dimensions and behavior names.
    pub(crate) fn with_events(&self, events: Vec<Event>) -> Result<Self> {
        Self::new(self.num_users, self.num_items, self.behaviors.clone(), self.target, events)
    }
}

/// Bijection between external string ids and contiguous internal ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdMap {
    external: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity-style map `prefix0, prefix1, ...` for generated data.
    pub fn sequential(prefix: &str, n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n {
            map.intern(&format!("{prefix}{i}"));
        }
        map
    }

    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.external.len();
        self.external.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn internal(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, i: usize) -> Option<&str> {
        self.external.get(i).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    /// Two columns: external id, internal id.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (i, id) in self.external.iter().enumerate() {
            writeln!(w, "{id}\t{i}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut rows = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let parse_err = |message: &str| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: message.to_string(),
            };
            let (ext, int) = line.split_once('\t').ok_or_else(|| parse_err("expected two columns"))?;
            let int: usize = int.trim().parse().map_err(|_| parse_err("bad internal id"))?;
            rows.push((int, ext.to_string()));
        }
        rows.sort();
        let mut map = Self::new();
        for (expected, (int, ext)) in rows.into_iter().enumerate() {
            if int != expected || map.internal(&ext).is_some() {
                return Err(Error::Data(format!("{}: id map is not a bijection", path.display())));
            }
            map.intern(&ext);
        }
        Ok(map)
    }
}
