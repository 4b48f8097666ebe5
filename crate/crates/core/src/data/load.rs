use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::{Event, IdMap, InteractionTensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DataFormat {
    /// `user<TAB>item<TAB>behavior[<TAB>unix-seconds]`, UTF-8.
    #[default]
    Tsv,
}

/// Interaction tensor together with the id maps used to build it.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub tensor: InteractionTensor,
    pub users: IdMap,
    pub items: IdMap,
}

impl LoadedData {
    pub fn summary(&self) -> String {
        format!(
            "I={} J={} K={} events={}",
            self.tensor.num_users(),
            self.tensor.num_items(),
            self.tensor.num_behaviors(),
            self.tensor.event_count()
        )
    }

    pub fn write_id_maps(&self, dir: &Path) -> Result<()> {
        self.users.write_tsv(&dir.join("users.tsv"))?;
        self.items.write_tsv(&dir.join("items.tsv"))
    }
}

/// Reads an interaction file. `behaviors` is the ordered list of accepted
/// behavior names and `target` must be one of them.
pub fn load_interactions(path: &Path, format: DataFormat, behaviors: &[String], target: &str) -> Result<LoadedData> {
    let DataFormat::Tsv = format;
    let target_idx = behaviors
        .iter()
        .position(|b| b == target)
        .ok_or_else(|| Error::Config(format!("target behavior {target:?} not in behavior list")))?;
    let reader = BufReader::new(File::open(path)?);
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) || fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected user, item, behavior[, timestamp]; got {} fields", fields.len()),
            });
        }
        let behavior = behaviors
            .iter()
            .position(|b| b == fields[2])
            .ok_or_else(|| Error::UnknownBehavior {
                name: fields[2].to_string(),
                line: line_no,
            })?;
        let timestamp = match fields.get(3) {
            Some(ts) => Some(ts.trim().parse::<i64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad timestamp {ts:?}"),
            })?),
            None => None,
        };
        events.push(Event {
            user: users.intern(fields[0]),
            item: items.intern(fields[1]),
            behavior,
            timestamp,
        });
    }
    if events.is_empty() {
        return Err(Error::NoInteractions);
    }
    let tensor = InteractionTensor::new(users.len(), items.len(), behaviors.to_vec(), target_idx, events)?;
    Ok(LoadedData { tensor, users, items })
}

/// Writes events in the loader's TSV format using external ids.
pub fn write_interactions(path: &Path, data: &LoadedData) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let t = &data.tensor;
    for e in t.events() {
        let user = data.users.external(e.user).expect("user id");
        let item = data.items.external(e.item).expect("item id");
        let behavior = &t.behaviors()[e.behavior];
        match e.timestamp {
            Some(ts) => writeln!(w, "{user}\t{item}\t{behavior}\t{ts}")?,
            None => writeln!(w, "{user}\t{item}\t{behavior}")?,
        }
    }
    w.flush()?;
    Ok(())
}
