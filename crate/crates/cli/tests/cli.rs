use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn mbgmn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbgmn"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn mbgmn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn gradcheck_default_instance_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(&["gradcheck", "--seed", "7"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gradcheck passed"));
}

#[test]
fn synth_writes_declared_behaviors_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(
        &[
            "synth", "--users", "500", "--items", "200", "--behaviors", "view,cart,buy", "--target",
            "buy", "--seed", "5", "--out", "data.tsv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("data.tsv")).unwrap();
    let mut seen = BTreeSet::new();
    let mut lines = 0;
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert!(fields.len() >= 3, "bad line {line:?}");
        seen.insert(fields[2].to_string());
        lines += 1;
    }
    assert!(lines > 0);
    let declared: BTreeSet<String> = ["view", "cart", "buy"].iter().map(|s| s.to_string()).collect();
    assert_eq!(seen, declared);
}

#[test]
fn evaluate_reproduces_train_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(
        &[
            "synth", "--users", "60", "--items", "150", "--density", "0.04", "--seed", "3", "--out",
            "data.tsv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = mbgmn(
        &[
            "train", "--data", "data.tsv", "--behaviors", "view,cart,buy", "--target", "buy", "--epochs",
            "2", "--seed", "1", "--dim", "8", "--out", "run",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = mbgmn(&["evaluate", "--checkpoint", "run/model.ckpt", "--out", "ev"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let trained = std::fs::read_to_string(dir.path().join("run/report.json")).unwrap();
    let evaluated = std::fs::read_to_string(dir.path().join("ev/report.json")).unwrap();
    let a: serde_json::Value = serde_json::from_str(&trained).unwrap();
    let b: serde_json::Value = serde_json::from_str(&evaluated).unwrap();
    assert!(a["evaluated"].as_u64().unwrap() > 0);
    assert_eq!(a, b);
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(&["train", "--bogus"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_seed_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(&["train", "--epochs", "1"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_data_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(&["train", "--data", "nope.tsv", "--seed", "1"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = mbgmn(&["train", "--config", "absent.conf"], dir.path());
    assert_ne!(code(&out), 0);
}

#[test]
fn corrupt_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.ckpt"), b"MBGMNCKP garbage").unwrap();
    let out = mbgmn(&["evaluate", "--checkpoint", "bad.ckpt", "--out", "ev"], dir.path());
    assert_eq!(code(&out), 2);
}
