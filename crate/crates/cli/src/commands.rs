use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use mbgmn_core::config::RunConfig;
use mbgmn_core::data::{generate_synthetic, write_interactions, SynthSpec};
use mbgmn_core::pipeline::{
    ablation_variants, evaluate_checkpoint, popularity_report, prepare, train_and_evaluate, write_outputs, AblationRow,
};
use mbgmn_core::train::{loss_gradient_check, read_checkpoint};
use mbgmn_core::{Error, Result};

use crate::args::{EvaluateArgs, GradcheckArgs, RunArgs, SynthArgs};

const DEFAULT_OUT: &str = "mbgmn-out";

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for (key, value) in args.overrides() {
        cfg.set(key, &value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn train(args: &RunArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let prepared = prepare(&cfg)?;
    let out = train_and_evaluate(&cfg, &prepared, |log| {
        eprintln!("epoch {:>3}  lr {:.6}  loss {:.4}", log.epoch, log.lr, log.mean_loss);
    })?;
    let dir = out_dir(&cfg);
    write_outputs(&dir, &cfg, &out)?;
    print!("{}", out.report.to_table());
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let ckpt = read_checkpoint(&args.checkpoint)?;
    let mut cfg = RunConfig::parse(&ckpt.meta)?;
    if let Some(data) = &args.data {
        cfg.set("data", data)?;
    }
    cfg.validate()?;
    let prepared = prepare(&cfg)?;
    let report = evaluate_checkpoint(&cfg, &prepared, &ckpt.state)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), report.to_json() + "\n")?;
        fs::write(dir.join("report.txt"), report.to_table())?;
    }
    print!("{}", report.to_table());
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let behaviors: Vec<&str> = args.behaviors.split(',').map(str::trim).filter(|b| !b.is_empty()).collect();
    let spec = SynthSpec::new(args.users, args.items, &behaviors, &args.target, args.density, args.rho, args.seed)?;
    let data = generate_synthetic(&spec)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_interactions(&args.out, &data)?;
    println!("{}", data.summary());
    Ok(())
}

pub fn ablate(args: &RunArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let prepared = prepare(&cfg)?;
    let dir = out_dir(&cfg);
    fs::create_dir_all(&dir)?;
    let mut rows = Vec::new();
    for (label, variant) in ablation_variants(&cfg)? {
        eprintln!("training {label}");
        let out = train_and_evaluate(&variant, &prepared, |_| {})?;
        let final_loss = out.logs.last().map_or(f64::NAN, |l| l.mean_loss);
        rows.push(AblationRow { variant: label, final_loss, report: out.report });
    }
    let popularity = popularity_report(&cfg, &prepared)?;
    rows.push(AblationRow { variant: "popularity".into(), final_loss: f64::NAN, report: popularity });

    let mut jsonl = String::new();
    for row in &rows {
        jsonl.push_str(&serde_json::to_string(row)?);
        jsonl.push('\n');
    }
    fs::write(dir.join("ablation.jsonl"), jsonl)?;
    let table = ablation_table(&rows);
    fs::write(dir.join("ablation.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    let cutoffs = &rows[0].report.cutoffs;
    let _ = write!(s, "{:<14}{:>12}", "variant", "final loss");
    for n in cutoffs {
        let _ = write!(s, "  HR@{n:<3}");
    }
    for n in cutoffs {
        let _ = write!(s, "  NDCG@{n:<3}");
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:<14}{:>12.4}", row.variant, row.final_loss);
        for v in row.report.overall.hr.iter().chain(&row.report.overall.ndcg) {
            let _ = write!(s, "  {v:.4}");
        }
        s.push('\n');
    }
    s
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<()> {
    let report = loss_gradient_check(args.seed, args.step, args.tol)?;
    println!(
        "coordinates {}  max relative error {:.3e}  max absolute error {:.3e}  tolerance {:.1e}",
        report.coordinates, report.max_rel_error, report.max_abs_error, report.tolerance
    );
    if let Some((t, c, a, n)) = report.worst {
        println!("worst: tensor {t} coordinate {c}: analytic {a:.9e} numeric {n:.9e}");
    }
    if report.passed {
        println!("gradcheck passed");
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "gradcheck failed: max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_error, report.tolerance
        )))
    }
}
