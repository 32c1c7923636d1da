use std::path::PathBuf;
use std::process::Command;

use super::*;
use crate::arch::tree_leaves;
use crate::data::PacketPlan;
use crate::tm::rng::KeyedStream;
use crate::tm::TaStateMatrix;

fn random_model(classes: usize, clauses: usize, features: usize, seed: u64) -> TaStateMatrix {
    let mut m = TaStateMatrix::new(classes, clauses, features, 8).unwrap();
    let s = KeyedStream::new(seed, &[2]);
    let mut k = 0;
    for c in 0..classes {
        for j in 0..clauses {
            for l in 0..2 * features {
                let st = if s.below(k, 5) == 0 { 9 } else { 8 };
                m.set_state(c, j, l, st as u32).unwrap();
                k += 1;
            }
        }
    }
    m
}

/// F=8, two classes, four clauses each, hand-picked includes.
fn tiny() -> CompiledModel {
    let mut m = TaStateMatrix::new(2, 4, 8, 8).unwrap();
    let inc: &[(usize, usize, &[usize])] = &[
        (0, 0, &[0, 1, 2, 3, 4]),
        (0, 1, &[8, 9]),
        (0, 2, &[0, 1, 2, 3, 5]),
        (1, 0, &[12, 13, 6]),
        (1, 1, &[7, 15]),
        (1, 3, &[4, 5, 6, 7]),
    ];
    for &(c, j, lits) in inc {
        for &l in lits {
            m.set_state(c, j, l, 9).unwrap();
        }
    }
    CompiledModel::new(&m, PacketPlan::new(8, 4).unwrap()).unwrap()
}

fn lint_clean(d: &RtlDesign) {
    let issues = lint_design(d.verilog_files());
    assert!(
        issues.is_empty(),
        "{}",
        issues
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    );
}

#[test]
fn emission_is_deterministic() {
    let m = random_model(3, 10, 30, 5);
    let c = CompiledModel::new(&m, PacketPlan::new(30, 8).unwrap()).unwrap();
    let cfg = EmitConfig::default();
    assert_eq!(emit_rtl(&c, &cfg).unwrap(), emit_rtl(&c, &cfg).unwrap());
}

#[test]
fn structure_follows_the_model() {
    for (classes, f, w) in [(3, 30, 8), (10, 50, 16), (2, 9, 9), (1, 5, 2)] {
        let m = random_model(classes, 6, f, classes as u64);
        let c = CompiledModel::new(&m, PacketPlan::new(f, w).unwrap()).unwrap();
        let d = emit_rtl(&c, &EmitConfig::default()).unwrap();
        let p = f.div_ceil(w);
        let hcbs = d
            .files
            .iter()
            .filter(|(n, _)| n.starts_with("hcb_"))
            .count();
        assert_eq!(hcbs, p);
        let top = d.get("top.v").unwrap();
        assert_eq!(top.matches("u_hcb_").count(), p);
        let cs = d.get("class_sum.v").unwrap();
        assert_eq!(cs.matches("_acc_").count(), 2 * classes);
        let am = d.get("argmax.v").unwrap();
        let leaves = tree_leaves(classes);
        assert_eq!(am.matches("assign lv0_").count(), leaves);
        assert_eq!(am.matches("= MIN_SUM;").count(), leaves - classes);
        lint_clean(&d);
    }
}

#[test]
fn stream_names_and_prefix_are_applied() {
    let c = tiny();
    let cfg = EmitConfig {
        prefix: "acc_".into(),
        signals: StreamSignals {
            tdata: "din".into(),
            tvalid: "din_valid".into(),
            tready: "din_ready".into(),
            tlast: "din_last".into(),
        },
        ..EmitConfig::default()
    };
    let d = emit_rtl(&c, &cfg).unwrap();
    let top = d.get("top.v").unwrap();
    assert!(top.contains("module acc_top ("));
    assert!(top.contains("input  wire [3:0] din,"));
    assert!(top.contains("output wire din_ready,"));
    assert!(!top.contains("s_axis"));
    lint_clean(&d);
}

#[test]
fn bad_configs_are_rejected() {
    let c = tiny();
    let bad = [
        EmitConfig {
            sum_width: Some(1),
            ..EmitConfig::default()
        },
        EmitConfig {
            prefix: "9x".into(),
            ..EmitConfig::default()
        },
        EmitConfig {
            clock_mhz: 0.0,
            ..EmitConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(emit_rtl(&c, &cfg), Err(RtlError::Config(_))));
    }
    let mut cfg = EmitConfig::default();
    cfg.signals.tlast = "module".into();
    assert!(emit_rtl(&c, &cfg).is_err());
}

#[test]
fn wider_sum_width_is_honoured() {
    let c = tiny();
    let d = emit_rtl(
        &c,
        &EmitConfig {
            sum_width: Some(12),
            ..EmitConfig::default()
        },
    )
    .unwrap();
    assert!(d
        .get("class_sum.v")
        .unwrap()
        .contains("wire signed [11:0] sum_0;"));
    assert_eq!(required_sum_width(4), 3);
}

#[test]
fn clause_terms_use_packet_local_bits() {
    let d = emit_rtl(&tiny(), &EmitConfig::default()).unwrap();
    // Class 1 clause 0 includes x6 (packet 1, bit 2) and the negations of x4, x5.
    let h1 = d.get("hcb_1.v").unwrap();
    assert!(h1.contains("~data[0]") && h1.contains("~data[1]") && h1.contains("data[2]"));
    // Class 0 clause 3 and class 1 clause 2 are empty: constant one in the first block.
    let h0 = d.get("hcb_0.v").unwrap();
    assert!(h0.contains("= 1'b1;"));
}

#[test]
fn design_bundle_has_vectors_and_manifest() {
    let c = tiny();
    let xs: Vec<BitVector> = (0..5u64)
        .map(|v| BitVector::from_u64(v * 37 % 256, 8))
        .collect();
    let ys: Vec<usize> = xs
        .iter()
        .map(|x| c.predict(x).unwrap().argmax_class)
        .collect();
    let prov = Provenance::new("abc", 1);
    let (d, man) = emit_design(&c, &EmitConfig::default(), &xs, &ys, &prov).unwrap();
    assert_eq!(d.get("vectors.mem").unwrap().lines().count(), 10);
    assert_eq!(d.get("expected.mem").unwrap().lines().count(), 5);
    assert_eq!(man.latency_cycles, 2 + 3);
    assert_eq!(man.files.len(), d.files.len() - 1);
    let back: Manifest = serde_json::from_str(d.get("manifest.json").unwrap()).unwrap();
    assert_eq!(back, man);
    assert!(emit_design(&c, &EmitConfig::default(), &xs, &ys[..2], &prov).is_err());
    lint_clean(&d);
}

#[test]
fn golden_tiny_design() {
    let d = emit_rtl(&tiny(), &EmitConfig::default()).unwrap();
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/tiny");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        d.write_to(&dir).unwrap();
    }
    for (name, text) in &d.files {
        let want = std::fs::read_to_string(dir.join(name))
            .unwrap_or_else(|e| panic!("golden {name}: {e}; rerun with UPDATE_GOLDEN=1"));
        assert_eq!(text, &want, "{name} differs from golden copy");
    }
}

fn yosys() -> Option<&'static str> {
    ["yowasp-yosys", "yosys"].into_iter().find(|b| {
        Command::new(b)
            .arg("-V")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

/// Elaborates the design with yosys when it is installed.
#[test]
fn yosys_elaborates_design() {
    let Some(bin) = yosys() else {
        eprintln!("yosys not found, skipping");
        return;
    };
    let m = random_model(3, 8, 20, 9);
    let c = CompiledModel::new(&m, PacketPlan::new(20, 8).unwrap()).unwrap();
    let d = emit_rtl(&c, &EmitConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    d.write_to(dir.path()).unwrap();
    let files: Vec<&str> = d.verilog_files().map(|(n, _)| n).collect();
    let script = format!(
        "read_verilog {}; hierarchy -check -top tm_top; proc; opt; check -assert",
        files.join(" ")
    );
    let out = Command::new(bin)
        .current_dir(dir.path())
        .args(["-q", "-p", &script])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
