use std::time::Instant;

use super::*;
use crate::data::{generate_synthetic, leave_one_out_split, SynthSpec, TrainBatch, TrainTuple};
use crate::model::transfer::score_rows;

fn synthetic_split(users: usize, items: usize, density: f64, seed: u64) -> SplitDataset {
    let spec = SynthSpec::new(users, items, &["view", "cart", "buy"], "buy", density, 0.8, seed).unwrap();
    let data = generate_synthetic(&spec).unwrap();
    leave_one_out_split(&data.tensor, seed).unwrap()
}

fn tiny_config(seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(seed);
    c.model.dim = 4;
    c.model.low_rank_dim = 2;
    c.batch_size = 8;
    c.epochs = 1;
    c
}

fn batch(split: &SplitDataset, model: &Model, seed: u64) -> TrainBatch {
    let users: Vec<usize> = trainable_users(split, model).into_iter().take(6).collect();
    sample_batch(split, &users, &[0, 1, 2], 2, seed, 0)
}

#[test]
fn hinge_examples() {
    let mut tape = Tape::new();
    let pos = tape.constant(Tensor::vector(vec![2.0, 0.2]));
    let neg = tape.constant(Tensor::vector(vec![0.5, 0.5]));
    let h = hinge(&mut tape, pos, neg).unwrap();
    assert_eq!(tape.value(h).data()[0], 0.0);
    assert!((tape.value(h).data()[1] - 1.3).abs() < 1e-15);
}

#[test]
fn hinge_sum_matches_tuple_loop() {
    let split = synthetic_split(40, 30, 0.08, 1);
    let config = tiny_config(1);
    let model = Model::for_graph(config.model.clone(), &split.train_graph).unwrap();
    let params = model.init_params(1);
    let batch = batch(&split, &model, 1);
    assert!(!batch.is_empty());

    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let emb = model.embed(&mut tape, &bound, &split.train_graph).unwrap();
    let out = batch_loss(&mut tape, &bound, &emb, &model, &batch, 0.0).unwrap();

    let mut expect = 0.0;
    for &TrainTuple { user, behavior, positive, negative } in &batch.tuples {
        for source in 0..=model.fused() {
            let mut t = Tape::new();
            let b = params.bind(&mut t, false);
            let e = model.embed(&mut t, &b, &split.train_graph).unwrap();
            let s = score_rows(&mut t, &b, &e, &model, &[user, user], &[positive, negative], behavior, &[source]).unwrap()[0];
            let v = t.value(s).data();
            expect += (1.0 - v[0] + v[1]).max(0.0);
        }
    }
    assert!((tape.value(out.loss).item() - expect).abs() < 1e-12);
    assert_eq!(out.regularization, 0.0);
    let attributed: f64 = out.pairs.sum.iter().flatten().sum();
    assert!((attributed - expect).abs() < 1e-12);
    assert!(out.per_tuple.iter().all(|&h| h >= 0.0));
}

#[test]
fn regularizer_matches_sum_of_squares() {
    let split = synthetic_split(40, 30, 0.08, 2);
    let config = tiny_config(2);
    let model = Model::for_graph(config.model.clone(), &split.train_graph).unwrap();
    let params = model.init_params(2);
    let batch = batch(&split, &model, 2);
    let loss_at = |lambda: f64| {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, true);
        let emb = model.embed(&mut tape, &bound, &split.train_graph).unwrap();
        let out = batch_loss(&mut tape, &bound, &emb, &model, &batch, lambda).unwrap();
        (tape.value(out.loss).item(), out.regularization)
    };
    let mut squares = 0.0;
    for t in params.tensors() {
        for x in t.data() {
            squares += x * x;
        }
    }
    let (with, reg) = loss_at(0.01);
    let (without, _) = loss_at(0.0);
    assert!((reg - 0.01 * squares).abs() < 1e-10);
    assert!((with - without - 0.01 * squares).abs() < 1e-10);
}

#[test]
fn mtask_scores_only_fused_source_on_target() {
    let split = synthetic_split(40, 30, 0.08, 3);
    let mut config = tiny_config(3);
    config.model.ablation.no_mtask = true;
    let (model, _, logs) = train(&split, &config).unwrap();
    let counts = &logs[0].pair_count;
    let populated: Vec<(usize, usize)> = (0..counts.len())
        .flat_map(|s| (0..counts[s].len()).map(move |t| (s, t)))
        .filter(|&(s, t)| counts[s][t] > 0)
        .collect();
    assert_eq!(populated, vec![(model.fused(), split.train.target())]);
}

#[test]
fn zero_gradient_adam_step_is_noop() {
    let mut p = Tensor::vector(vec![0.5, -1.25, 3.0]);
    let before = p.clone();
    let g = Tensor::zeros(&[3]);
    let (mut m, mut v) = (Tensor::zeros(&[3]), Tensor::zeros(&[3]));
    adam_update(&mut p, &g, &mut m, &mut v, 1e-3, 1);
    assert_eq!(p, before);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let mut p = Tensor::vector(vec![1.0, 1.0]);
    let g = Tensor::vector(vec![0.3, -4.0]);
    let (mut m, mut v) = (Tensor::zeros(&[2]), Tensor::zeros(&[2]));
    adam_update(&mut p, &g, &mut m, &mut v, 0.01, 1);
    // Bias-corrected first step is lr * sign(g) up to epsilon.
    assert!((p.data()[0] - 0.99).abs() < 1e-9);
    assert!((p.data()[1] - 1.01).abs() < 1e-9);
}

#[test]
fn zero_learning_rate_keeps_params() {
    let split = synthetic_split(40, 30, 0.08, 4);
    let mut config = tiny_config(4);
    config.learning_rate = 0.0;
    let model = Model::for_graph(config.model.clone(), &split.train_graph).unwrap();
    let mut state = TrainState::new(&model, &config);
    let before = state.params.clone();
    train_epoch(&split, &model, &mut state, &config, &[]).unwrap();
    assert!(state.params.same_bits(&before));
    assert!(state.step > 0);
}

#[test]
fn fixed_seed_training_is_bit_identical() {
    let split = synthetic_split(40, 30, 0.08, 5);
    let mut config = tiny_config(5);
    config.epochs = 2;
    let (_, a, la) = train(&split, &config).unwrap();
    let (_, b, lb) = train(&split, &config).unwrap();
    assert!(a.same_bits(&b));
    assert_eq!(serde_json::to_string(&la).unwrap(), serde_json::to_string(&lb).unwrap());
    config.seed = 6;
    let (_, c, _) = train(&split, &config).unwrap();
    assert!(!a.params.same_bits(&c.params));
}

#[test]
fn lr_decays_per_epoch() {
    let split = synthetic_split(40, 30, 0.08, 6);
    let mut config = tiny_config(6);
    config.epochs = 3;
    let (_, state, logs) = train(&split, &config).unwrap();
    assert_eq!(logs[0].lr, 1e-3);
    assert_eq!(logs[1].lr, 1e-3 * 0.96);
    assert_eq!(state.lr, 1e-3 * 0.96 * 0.96 * 0.96);
}

#[test]
fn tracked_users_sum_to_their_tuples() {
    let split = synthetic_split(40, 30, 0.08, 7);
    let config = tiny_config(7);
    let model = Model::for_graph(config.model.clone(), &split.train_graph).unwrap();
    let mut state = TrainState::new(&model, &config);
    let users = trainable_users(&split, &model);
    let log = train_epoch(&split, &model, &mut state, &config, &users).unwrap();
    let tracked: f64 = log.tracked.iter().map(|(_, h)| h).sum();
    let total: f64 = log.pair_loss_sum.iter().flatten().sum();
    assert!((tracked - total).abs() < 1e-9 * total.max(1.0));
}

#[test]
fn checkpoint_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let split = synthetic_split(40, 30, 0.08, 8);
    let config = tiny_config(8);
    let (_, mut state, _) = train(&split, &config).unwrap();
    state.best = Some((1, 0.25));
    let path = dir.path().join("model.ckpt");
    let ckpt = Checkpoint { state, meta: "seed = 8\n".into() };
    write_checkpoint(&path, &ckpt).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert!(back.state.same_bits(&ckpt.state));
    assert_eq!(back.state.params.names(), ckpt.state.params.names());
    assert_eq!(back, ckpt);

    assert!(matches!(read_checkpoint(&dir.path().join("missing")), Err(Error::Io(_))));

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[40] ^= 1;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(m)) if m.contains("checksum")));

    // A file with the right checksum but another version.
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[40] ^= 1;
    bytes[8] = 9;
    let n = bytes.len() - 32;
    let digest = <sha2::Sha256 as sha2::Digest>::digest(&bytes[..n]);
    bytes[n..].copy_from_slice(&digest);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(m)) if m.contains("version")));
}

#[test]
fn resume_matches_uninterrupted_training() {
    let dir = tempfile::tempdir().unwrap();
    let split = synthetic_split(40, 30, 0.08, 9);
    let mut config = tiny_config(9);
    config.epochs = 2;
    let (model, straight, _) = train(&split, &config).unwrap();

    config.epochs = 1;
    let (_, first, _) = train(&split, &config).unwrap();
    let path = dir.path().join("resume.ckpt");
    write_checkpoint(&path, &Checkpoint { state: first, meta: String::new() }).unwrap();
    let mut resumed = read_checkpoint(&path).unwrap().state;
    train_epoch(&split, &model, &mut resumed, &config, &[]).unwrap();
    assert!(resumed.same_bits(&straight));
}

#[test]
fn target_only_mask_leaves_one_channel() {
    let split = synthetic_split(40, 30, 0.08, 10);
    let masked = apply_mask(&split, &BehaviorMask::parse("+buy-only")).unwrap();
    assert_eq!(masked.train.num_behaviors(), 1);
    assert_eq!(masked.train.behaviors(), &["buy".to_string()]);
    assert_eq!(masked.test, split.test);
    let mut config = tiny_config(10);
    config.mask = BehaviorMask::parse("+buy-only");
    let (model, _, logs) = train(&masked, &config).unwrap();
    assert_eq!(model.behaviors, 1);
    assert!(logs[0].mean_loss.is_finite());

    let masked = apply_mask(&split, &BehaviorMask::parse("-view")).unwrap();
    assert_eq!(masked.train.behaviors(), &["cart".to_string(), "buy".to_string()]);
    assert_eq!(masked.train.target(), 1);
    assert!(apply_mask(&split, &BehaviorMask::parse("-view,-cart,-buy")).is_err());
    assert!(apply_mask(&split, &BehaviorMask::parse("-like")).is_err());
}

#[test]
fn loss_drops_over_twenty_epochs() {
    let split = synthetic_split(200, 100, 0.05, 11);
    let mut config = TrainConfig::new(11);
    config.epochs = 20;
    let start = Instant::now();
    let (_, _, logs) = train(&split, &config).unwrap();
    let curve: Vec<String> = logs.iter().map(|l| format!("{:.4}", l.mean_loss)).collect();
    println!("loss curve: {}", curve.join(" "));
    println!("elapsed: {:.1?}", start.elapsed());
    assert!(logs[19].mean_loss < 0.7 * logs[0].mean_loss);
}

#[test]
fn full_objective_gradient_check() {
    for seed in [7, 8] {
        let report = loss_gradient_check(seed, SUITE_STEP, SUITE_TOLERANCE).unwrap();
        println!("seed {seed}: {} coords, max rel {:.3e}, worst {:?}", report.coordinates, report.max_rel_error, report.worst);
        assert!(report.passed);
    }
}
