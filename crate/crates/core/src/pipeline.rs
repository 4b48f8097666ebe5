//! End-to-end run: data, split, mask, train, evaluate, write artifacts.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::config::{DataSource, RunConfig};
use crate::data::{generate_synthetic, leave_one_out_split, load_interactions, DataFormat, LoadedData, SplitDataset};
use crate::error::Result;
use crate::eval::{dependency_report, evaluate, evaluate_with_counts, EvalOptions, EvalReport, ModelScorer, PopularityScorer};
use crate::model::{Ablation, Model};
use crate::train::{apply_mask, train_epoch, write_checkpoint, BehaviorMask, Checkpoint, EpochLog, TrainState};

pub struct Prepared {
    pub data: LoadedData,
    /// Unmasked split; masks only touch the training side.
    pub split: SplitDataset,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let data = match &cfg.data {
        DataSource::Tsv(path) => load_interactions(path, DataFormat::Tsv, &cfg.behaviors, &cfg.target)?,
        DataSource::Synthetic { .. } => generate_synthetic(&cfg.synth_spec()?.expect("synthetic source"))?,
    };
    log::info!("{}", data.summary());
    let split = leave_one_out_split(&data.tensor, cfg.seed())?;
    log::info!("{} test users, {} excluded", split.test.len(), split.excluded.len());
    Ok(Prepared { data, split })
}

pub struct RunOutput {
    pub model: Model,
    pub state: TrainState,
    pub logs: Vec<EpochLog>,
    pub report: EvalReport,
    /// Split the model was trained on (mask applied).
    pub split: SplitDataset,
}

fn eval_options(cfg: &RunConfig) -> EvalOptions {
    EvalOptions {
        cutoffs: cfg.cutoffs.clone(),
        ..EvalOptions::default()
    }
}

/// Trains from scratch, calling `on_epoch` after every epoch.
pub fn train_and_evaluate(
    cfg: &RunConfig,
    prepared: &Prepared,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<RunOutput> {
    cfg.validate()?;
    let split = apply_mask(&prepared.split, &cfg.train.mask)?;
    let model = Model::for_graph(cfg.train.model.clone(), &split.train_graph)?;
    let mut state = TrainState::new(&model, &cfg.train);
    let mut logs = Vec::with_capacity(cfg.train.epochs);
    for _ in 0..cfg.train.epochs {
        let log = train_epoch(&split, &model, &mut state, &cfg.train, &[])?;
        on_epoch(&log);
        logs.push(log);
    }
    let report = evaluate_masked(cfg, prepared, &split, &model, &state)?;
    if let Some(hr) = report.hr_at(10) {
        state.best = Some((state.epoch, hr));
    }
    Ok(RunOutput {
        model,
        state,
        logs,
        report,
        split,
    })
}

/// Scores on the masked split; buckets use the unmasked train counts so every
/// variant sees the same bucket membership.
fn evaluate_masked(
    cfg: &RunConfig,
    prepared: &Prepared,
    split: &SplitDataset,
    model: &Model,
    state: &TrainState,
) -> Result<EvalReport> {
    let scorer = ModelScorer::new(model, &state.params, split)?;
    evaluate_with_counts(split, &scorer, &eval_options(cfg), &prepared.split.train_counts())
}

pub fn evaluate_state(cfg: &RunConfig, split: &SplitDataset, model: &Model, state: &TrainState) -> Result<EvalReport> {
    let scorer = ModelScorer::new(model, &state.params, split)?;
    evaluate(split, &scorer, &eval_options(cfg))
}

/// Rebuilds model and masked split for a restored state.
pub fn evaluate_checkpoint(cfg: &RunConfig, prepared: &Prepared, state: &TrainState) -> Result<EvalReport> {
    let split = apply_mask(&prepared.split, &cfg.train.mask)?;
    let model = Model::for_graph(cfg.train.model.clone(), &split.train_graph)?;
    evaluate_masked(cfg, prepared, &split, &model, state)
}

pub fn popularity_report(cfg: &RunConfig, prepared: &Prepared) -> Result<EvalReport> {
    evaluate(&prepared.split, &PopularityScorer::new(&prepared.split), &eval_options(cfg))
}

/// Writes `model.ckpt`, `epochs.jsonl`, `report.json`, `report.txt`,
/// `dependency.json` and `config.txt` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = cfg.to_text();
    fs::write(dir.join("config.txt"), &meta)?;
    write_checkpoint(
        &dir.join("model.ckpt"),
        &Checkpoint {
            state: out.state.clone(),
            meta,
        },
    )?;
    let mut epochs = fs::File::create(dir.join("epochs.jsonl"))?;
    for log in &out.logs {
        writeln!(epochs, "{}", serde_json::to_string(log)?)?;
    }
    fs::write(dir.join("report.json"), out.report.to_json() + "\n")?;
    fs::write(dir.join("report.txt"), out.report.to_table())?;
    if !out.logs.is_empty() {
        let dep = dependency_report(&out.logs, out.split.train.behaviors())?;
        fs::write(dir.join("dependency.json"), serde_json::to_string(&dep)? + "\n")?;
    }
    Ok(())
}

/// The full model, each single ablation flag, each single context-behavior
/// drop and the target-only mask, as `(label, config)` pairs.
pub fn ablation_variants(cfg: &RunConfig) -> Result<Vec<(String, RunConfig)>> {
    let mut base = cfg.clone();
    base.train.model.ablation = Default::default();
    base.train.mask = BehaviorMask::default();
    let mut out = vec![("full".to_string(), base.clone())];
    for flag in Ablation::FLAGS {
        let mut c = base.clone();
        c.train.model.ablation.set(flag)?;
        out.push((format!("w/o {flag}"), c));
    }
    for name in cfg.behaviors.iter().filter(|b| **b != cfg.target) {
        let mut c = base.clone();
        c.train.mask = BehaviorMask { drop: vec![name.clone()], target_only: false };
        out.push((format!("-{name}"), c));
    }
    let mut c = base;
    c.train.mask = BehaviorMask { drop: Vec::new(), target_only: true };
    out.push((format!("+{}-only", cfg.target), c));
    Ok(out)
}

/// One row of an ablation comparison.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub final_loss: f64,
    pub report: EvalReport,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_runs_keep_unmasked_buckets() {
        let base = RunConfig::parse(
            "seed = 4\nsynth-users = 60\nsynth-items = 150\nsynth-density = 0.04\nepochs = 1\ndim = 4\nlow-rank-dim = 2\n",
        )
        .unwrap();
        let prepared = prepare(&base).unwrap();
        let pop = popularity_report(&base, &prepared).unwrap();
        let mut masked = base.clone();
        masked.set("drop-behaviors", "+buy-only").unwrap();
        let out = train_and_evaluate(&masked, &prepared, |_| {}).unwrap();
        let users = |r: &EvalReport| r.buckets.iter().map(|b| b.users).collect::<Vec<_>>();
        assert!(out.report.evaluated > 0);
        assert_eq!(users(&out.report), users(&pop));
        let state = out.state.clone();
        assert_eq!(evaluate_checkpoint(&masked, &prepared, &state).unwrap().to_json(), out.report.to_json());
    }
}
