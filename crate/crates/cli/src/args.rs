use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "mbgmn", version, about = "Multi-behavior graph meta network recommender")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model, evaluate it and write checkpoint, logs and report.
    Train(RunArgs),
    /// Evaluate a checkpoint written by `train`.
    Evaluate(EvaluateArgs),
    /// Write a synthetic multi-behavior TSV.
    Synth(SynthArgs),
    /// Train the full model and every ablation variant; write a comparison table.
    Ablate(RunArgs),
    /// Finite-difference check of the full training objective.
    Gradcheck(GradcheckArgs),
}

/// Run settings. Flags override keys of the same name in `--config`.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Interaction TSV, or `synthetic`.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long = "target-behavior", alias = "target")]
    pub target_behavior: Option<String>,
    /// Comma-separated behavior names.
    #[arg(long)]
    pub behaviors: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long = "low-rank-dim")]
    pub low_rank_dim: Option<String>,
    #[arg(long)]
    pub heads: Option<String>,
    #[arg(long = "init-std")]
    pub init_std: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<String>,
    #[arg(long = "samples-per-user")]
    pub samples_per_user: Option<String>,
    #[arg(long = "learning-rate")]
    pub learning_rate: Option<String>,
    #[arg(long = "lr-decay")]
    pub lr_decay: Option<String>,
    /// Ablation flags: lowR, mFeat, mTask, metaC, metaP.
    #[arg(long, value_name = "FLAG,...")]
    pub ablate: Option<String>,
    /// Behaviors to drop from training, e.g. `view,cart` or `+buy-only`.
    #[arg(long = "drop-behaviors", value_name = "NAME,...", allow_hyphen_values = true)]
    pub drop_behaviors: Option<String>,
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[arg(long = "synth-users")]
    pub synth_users: Option<String>,
    #[arg(long = "synth-items")]
    pub synth_items: Option<String>,
    #[arg(long = "synth-density")]
    pub synth_density: Option<String>,
    #[arg(long = "synth-rho")]
    pub synth_rho: Option<String>,
    #[arg(long = "synth-seed")]
    pub synth_seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// `(config key, flag value)` for every flag that was given.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let pairs: [(&str, &Option<String>); 23] = [
            ("data", &self.data),
            ("synth-users", &self.synth_users),
            ("synth-items", &self.synth_items),
            ("synth-density", &self.synth_density),
            ("synth-rho", &self.synth_rho),
            ("synth-seed", &self.synth_seed),
            ("behaviors", &self.behaviors),
            ("target-behavior", &self.target_behavior),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("layers", &self.layers),
            ("dim", &self.dim),
            ("low-rank-dim", &self.low_rank_dim),
            ("heads", &self.heads),
            ("init-std", &self.init_std),
            ("lambda", &self.lambda),
            ("batch-size", &self.batch_size),
            ("samples-per-user", &self.samples_per_user),
            ("learning-rate", &self.learning_rate),
            ("lr-decay", &self.lr_decay),
            ("ablate", &self.ablate),
            ("drop-behaviors", &self.drop_behaviors),
            ("cutoffs", &self.cutoffs),
        ];
        let mut out: Vec<(&'static str, String)> =
            pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone()))).collect();
        if let Some(dir) = &self.out {
            out.push(("out", dir.display().to_string()));
        }
        out
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Replaces the data path stored in the checkpoint.
    #[arg(long)]
    pub data: Option<String>,
    /// Directory for `report.json` / `report.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub items: usize,
    #[arg(long, default_value = "view,cart,buy")]
    pub behaviors: String,
    #[arg(long = "target", alias = "target-behavior", default_value = "buy")]
    pub target: String,
    #[arg(long, default_value_t = 0.02)]
    pub density: f64,
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output TSV; id maps are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = mbgmn_core::train::SUITE_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = mbgmn_core::train::SUITE_TOLERANCE)]
    pub tol: f64,
}
