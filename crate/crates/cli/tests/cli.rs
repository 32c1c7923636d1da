use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn tmforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmforge"))
        .args(args)
        .env_remove("TMFORGE_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_xor_config(dir: &Path, epochs: usize) -> String {
    let cfg = json!({
        "dataset": {"format": "noisy_xor", "train_samples": 5000, "test_samples": 2000},
        "hyperparams": {"clauses_per_class": 10, "threshold": 15, "specificity": 3.9, "states_per_action": 100, "epochs": epochs},
        "bandwidth": 4,
        "seed": 7,
        "emit": {"test_vectors": 8},
        "output_dir": "run"
    });
    let path = dir.join("xor.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn train_then_verify_noisy_xor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_xor_config(dir.path(), 30);
    let out = dir.path().join("run").display().to_string();
    let t = tmforge(&["train", "-c", &cfg, "-o", &out]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    assert!(tmforge(&["compile", "-c", &cfg, "-o", &out])
        .status
        .success());
    let v = tmforge(&[
        "verify",
        "-c",
        &cfg,
        "-o",
        &out,
        "--set",
        "verify.min_accuracy=0.95",
    ]);
    let text = stdout(&v);
    assert_eq!(v.status.code(), Some(0), "{text}");
    assert!(text.contains("0 mismatches"), "{text}");
    assert!(text.contains("[verify] PASS"), "{text}");
}

#[test]
fn verification_failure_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_xor_config(dir.path(), 1);
    let out = dir.path().join("run").display().to_string();
    assert!(tmforge(&["train", "-c", &cfg, "-o", &out]).status.success());
    assert!(tmforge(&["compile", "-c", &cfg, "-o", &out])
        .status
        .success());
    let v = tmforge(&[
        "verify",
        "-c",
        &cfg,
        "-o",
        &out,
        "--set",
        "verify.min_accuracy=1.0",
    ]);
    assert_eq!(v.status.code(), Some(3), "{}", stdout(&v));
}

#[test]
fn emit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_xor_config(dir.path(), 2);
    let out = dir.path().join("run").display().to_string();
    assert!(tmforge(&["train", "-c", &cfg, "-o", &out]).status.success());
    assert!(tmforge(&["compile", "-c", &cfg, "-o", &out])
        .status
        .success());
    let a = tmforge(&["emit", "-c", &cfg, "-o", &out]);
    let b = tmforge(&["emit", "-c", &cfg, "-o", &out]);
    assert!(a.status.success());
    let hash = |o: &Output| {
        stdout(o)
            .lines()
            .find(|l| l.contains("manifest sha256"))
            .unwrap()
            .to_string()
    };
    assert_eq!(hash(&a), hash(&b));
}

fn write_idx(dir: &Path, name: &str, magic: u32, dims: &[u32], payload: &[u8]) {
    let mut b = magic.to_be_bytes().to_vec();
    for d in dims {
        b.extend(d.to_be_bytes());
    }
    b.extend(payload);
    fs::write(dir.join(name), b).unwrap();
}

#[test]
fn report_shows_mnist_shaped_throughput() {
    let dir = tempfile::tempdir().unwrap();
    write_idx(dir.path(), "img", 0x803, &[2, 28, 28], &[0u8; 2 * 784]);
    write_idx(dir.path(), "lbl", 0x801, &[2], &[0, 1]);
    let cfg = json!({
        "dataset": {"format": "idx", "train_images": "img", "train_labels": "lbl", "test_images": "img", "test_labels": "lbl"},
        "output_dir": dir.path().join("run").display().to_string()
    });
    let path = dir.path().join("mnist.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let r = tmforge(&["report", "-c", &path.display().to_string()]);
    let text = stdout(&r);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(text.contains("throughput 3,846,153 inf/s"), "{text}");
    assert!(text.contains("13 packets"), "{text}");
    assert!(dir.path().join("run/report.txt").exists());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_xor_config(dir.path(), 1);
    let out = dir.path().join("run").display().to_string();
    assert!(tmforge(&["train", "-c", &cfg, "-o", &out]).status.success());
    let c = tmforge(&[
        "compile",
        "-c",
        &cfg,
        "-o",
        &out,
        "--bandwidth",
        "3",
        "--prune",
    ]);
    assert!(c.status.success());
    let compiled: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/compiled.json")).unwrap())
            .unwrap();
    assert_eq!(compiled["bandwidth"], 3);
    assert_eq!(compiled["packet_count"], 4);
    let copy: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/config.json")).unwrap())
            .unwrap();
    assert_eq!(copy["config"]["prune_contradictory"], true);
}

#[test]
fn errors_exit_nonzero_with_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_xor_config(dir.path(), 1);
    let out = dir.path().join("run");
    let c = tmforge(&["compile", "-c", &cfg, "-o", &out.display().to_string()]);
    assert_eq!(c.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&c.stderr).contains("compile failed"));
    assert!(out.join("compile.failed").exists());

    let missing = tmforge(&["train", "-c", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad = tmforge(&[
        "train",
        "-c",
        &cfg,
        "--set",
        "hyperparams.clauses_per_class=3",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn import_then_run_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_xor_config(dir.path(), 1);
    // Clause 0 of class 1 fires on x0 & !x1, clause 2 on !x0 & x1; both vote for class 1.
    let f = 12;
    let clause = |pos: &[usize], neg: &[usize]| {
        let mut v = vec![0u8; 2 * f];
        for &p in pos {
            v[p] = 1;
        }
        for &n in neg {
            v[f + n] = 1;
        }
        v
    };
    let zero = vec![0u8; 2 * f];
    let none = clause(&[], &[0, 1, 2, 3, 4, 5]);
    let class0 = vec![
        clause(&[0, 1], &[]),
        none.clone(),
        clause(&[], &[0, 1]),
        none.clone(),
        zero.clone(),
        none.clone(),
        zero.clone(),
        none.clone(),
        zero.clone(),
        none.clone(),
    ];
    let class1 = vec![
        clause(&[0], &[1]),
        none.clone(),
        clause(&[1], &[0]),
        none.clone(),
        zero.clone(),
        none.clone(),
        zero.clone(),
        none.clone(),
        zero.clone(),
        none,
    ];
    let import = dir.path().join("hand.json");
    fs::write(
        &import,
        json!({"states_per_action": 100, "actions": [class0, class1]}).to_string(),
    )
    .unwrap();
    let out = dir.path().join("run").display().to_string();
    let r = tmforge(&[
        "run",
        "-c",
        &cfg,
        "-o",
        &out,
        "--import",
        &import.display().to_string(),
        "--set",
        "verify.min_accuracy=1.0",
    ]);
    let text = stdout(&r);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{text}\n{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(
        text.contains("[import] imported 2 classes x 10 clauses on 12 features"),
        "{text}"
    );
    assert!(text.contains("accuracy 1.0000"), "{text}");
}
