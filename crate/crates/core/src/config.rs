//! Flat `key = value` run configuration shared by config files and CLI flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::SynthSpec;
use crate::error::{Error, Result};
use crate::model::Ablation;
use crate::train::{BehaviorMask, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Tsv(PathBuf),
    Synthetic {
        users: usize,
        items: usize,
        density: f64,
        rho: f64,
        /// Defaults to the run seed.
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub behaviors: Vec<String>,
    pub target: String,
    pub train: TrainConfig,
    pub cutoffs: Vec<usize>,
    pub out: Option<PathBuf>,
    seed_set: bool,
}

/// Keys accepted by [`RunConfig::set`], in canonical output order.
pub const KEYS: [&str; 24] = [
    "data",
    "synth-users",
    "synth-items",
    "synth-density",
    "synth-rho",
    "synth-seed",
    "behaviors",
    "target-behavior",
    "seed",
    "epochs",
    "layers",
    "dim",
    "low-rank-dim",
    "heads",
    "init-std",
    "lambda",
    "batch-size",
    "samples-per-user",
    "learning-rate",
    "lr-decay",
    "ablate",
    "drop-behaviors",
    "cutoffs",
    "out",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic {
                users: 500,
                items: 200,
                density: 0.02,
                rho: 0.8,
                seed: None,
            },
            behaviors: vec!["view".into(), "cart".into(), "buy".into()],
            target: "buy".into(),
            train: TrainConfig::new(0),
            cutoffs: crate::eval::CUTOFFS.to_vec(),
            out: None,
            seed_set: false,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "data" => {
                self.data = if value == "synthetic" {
                    Self::default().data
                } else {
                    DataSource::Tsv(PathBuf::from(value))
                }
            }
            "synth-users" | "synth-items" | "synth-density" | "synth-rho" | "synth-seed" => {
                if !matches!(self.data, DataSource::Synthetic { .. }) {
                    self.data = Self::default().data;
                }
                if let DataSource::Synthetic { users, items, density, rho, seed } = &mut self.data {
                    match key {
                        "synth-users" => *users = num(key, value)?,
                        "synth-items" => *items = num(key, value)?,
                        "synth-density" => *density = num(key, value)?,
                        "synth-rho" => *rho = num(key, value)?,
                        _ => *seed = Some(num(key, value)?),
                    }
                }
            }
            "behaviors" => self.behaviors = list(value),
            "target-behavior" => self.target = value.to_string(),
            "seed" => {
                t.seed = num(key, value)?;
                self.seed_set = true;
            }
            "epochs" => t.epochs = num(key, value)?,
            "layers" => t.model.layers = num(key, value)?,
            "dim" => t.model.dim = num(key, value)?,
            "low-rank-dim" => t.model.low_rank_dim = num(key, value)?,
            "heads" => t.model.heads = num(key, value)?,
            "init-std" => t.model.init_std = num(key, value)?,
            "lambda" => t.lambda = num(key, value)?,
            "batch-size" => t.batch_size = num(key, value)?,
            "samples-per-user" => t.samples = num(key, value)?,
            "learning-rate" => t.learning_rate = num(key, value)?,
            "lr-decay" => t.lr_decay = num(key, value)?,
            "ablate" => t.model.ablation = Ablation::parse(value)?,
            "drop-behaviors" => t.mask = BehaviorMask::parse(value),
            "cutoffs" => {
                self.cutoffs = list(value).iter().map(|v| num(key, v)).collect::<Result<_>>()?;
            }
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn validate(&self) -> Result<()> {
        if !self.seed_set {
            return Err(Error::Config("a seed is required".into()));
        }
        if !self.behaviors.contains(&self.target) {
            return Err(Error::Config(format!(
                "target behavior {:?} is not among {:?}",
                self.target, self.behaviors
            )));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::Config("cutoffs must be positive".into()));
        }
        self.train.validate()
    }

    pub fn synth_spec(&self) -> Result<Option<SynthSpec>> {
        match &self.data {
            DataSource::Tsv(_) => Ok(None),
            &DataSource::Synthetic { users, items, density, rho, seed } => {
                let names: Vec<&str> = self.behaviors.iter().map(String::as_str).collect();
                SynthSpec::new(users, items, &names, &self.target, density, rho, seed.unwrap_or(self.seed())).map(Some)
            }
        }
    }

    /// Canonical text; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &self.data {
            DataSource::Tsv(p) => put("data", p.display().to_string()),
            DataSource::Synthetic { users, items, density, rho, seed } => {
                put("data", "synthetic".into());
                put("synth-users", users.to_string());
                put("synth-items", items.to_string());
                put("synth-density", density.to_string());
                put("synth-rho", rho.to_string());
                if let Some(seed) = seed {
                    put("synth-seed", seed.to_string());
                }
            }
        }
        put("behaviors", self.behaviors.join(","));
        put("target-behavior", self.target.clone());
        if self.seed_set {
            put("seed", t.seed.to_string());
        }
        put("epochs", t.epochs.to_string());
        put("layers", t.model.layers.to_string());
        put("dim", t.model.dim.to_string());
        put("low-rank-dim", t.model.low_rank_dim.to_string());
        put("heads", t.model.heads.to_string());
        put("init-std", t.model.init_std.to_string());
        put("lambda", t.lambda.to_string());
        put("batch-size", t.batch_size.to_string());
        put("samples-per-user", t.samples.to_string());
        put("learning-rate", t.learning_rate.to_string());
        put("lr-decay", t.lr_decay.to_string());
        put("ablate", t.model.ablation.names().join(","));
        put("drop-behaviors", t.mask.label(&self.target));
        put("cutoffs", self.cutoffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        s
    }
}
