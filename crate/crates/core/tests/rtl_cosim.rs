//! Lockstep co-simulation: the emitted Verilog is lowered to a gate netlist
//! by yosys and stepped next to the cycle model. Every output must agree on
//! every cycle. Skipped when yosys is not installed.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tmforge::arch::DatapathConfig;
use tmforge::bits::BitVector;
use tmforge::compile::{partition, share_subexpressions, CompiledModel};
use tmforge::data::{packetize, PacketPlan};
use tmforge::rtl::{emit_rtl, EmitConfig};
use tmforge::sim::{Accelerator, CycleInputs};
use tmforge::tm::rng::KeyedStream;
use tmforge::tm::TaStateMatrix;

fn yosys() -> Option<&'static str> {
    ["yowasp-yosys", "yosys"].into_iter().find(|b| {
        Command::new(b)
            .arg("-V")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[derive(Clone, Copy)]
enum Src {
    Const(bool),
    Net(usize),
}

struct Cell {
    kind: String,
    ins: Vec<Src>,
    out: usize,
}

/// Fine-grained gate netlist with positive-edge flops only.
struct Gates {
    values: Vec<bool>,
    comb: Vec<Cell>,
    flops: Vec<(Src, usize)>,
    ports: HashMap<String, Vec<Src>>,
}

fn src(v: &Value) -> Src {
    match v {
        Value::Number(n) => Src::Net(n.as_u64().unwrap() as usize),
        Value::String(s) => Src::Const(s == "1"),
        _ => panic!("bad bit {v}"),
    }
}

impl Gates {
    fn load(path: &Path, top: &str) -> Self {
        let j: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let m = &j["modules"][top];
        let mut ports = HashMap::new();
        let mut max = 0;
        for (name, p) in m["ports"].as_object().unwrap() {
            let bits: Vec<Src> = p["bits"].as_array().unwrap().iter().map(src).collect();
            ports.insert(name.clone(), bits);
        }
        let mut cells = Vec::new();
        let mut flops = Vec::new();
        for c in m["cells"].as_object().unwrap().values() {
            let kind = c["type"].as_str().unwrap().to_string();
            if kind == "$scopeinfo" {
                continue;
            }
            let pin = |n: &str| src(&c["connections"][n][0]);
            let out = match pin(if kind == "$_DFF_P_" { "Q" } else { "Y" }) {
                Src::Net(n) => n,
                Src::Const(_) => continue,
            };
            max = max.max(out);
            if kind == "$_DFF_P_" {
                flops.push((pin("D"), out));
                continue;
            }
            let ins = match kind.as_str() {
                "$_NOT_" | "$_BUF_" => vec![pin("A")],
                "$_MUX_" => vec![pin("A"), pin("B"), pin("S")],
                _ => vec![pin("A"), pin("B")],
            };
            for s in &ins {
                if let Src::Net(n) = s {
                    max = max.max(*n);
                }
            }
            cells.push(Cell { kind, ins, out });
        }
        for bits in ports.values() {
            for b in bits {
                if let Src::Net(n) = b {
                    max = max.max(*n);
                }
            }
        }
        // Topological order over combinational cells.
        let driver: HashMap<usize, usize> =
            cells.iter().enumerate().map(|(i, c)| (c.out, i)).collect();
        let mut order = Vec::with_capacity(cells.len());
        let mut mark = vec![0u8; cells.len()];
        fn visit(
            i: usize,
            cells: &[Cell],
            driver: &HashMap<usize, usize>,
            mark: &mut [u8],
            order: &mut Vec<usize>,
        ) {
            if mark[i] == 2 {
                return;
            }
            assert_ne!(mark[i], 1, "combinational loop");
            mark[i] = 1;
            for s in &cells[i].ins {
                if let Src::Net(n) = s {
                    if let Some(&d) = driver.get(n) {
                        visit(d, cells, driver, mark, order);
                    }
                }
            }
            mark[i] = 2;
            order.push(i);
        }
        for i in 0..cells.len() {
            visit(i, &cells, &driver, &mut mark, &mut order);
        }
        let mut slots: Vec<Option<Cell>> = cells.into_iter().map(Some).collect();
        let comb = order
            .into_iter()
            .map(|i| slots[i].take().unwrap())
            .collect();
        Self {
            values: vec![false; max + 1],
            comb,
            flops,
            ports,
        }
    }

    fn get(&self, s: Src) -> bool {
        match s {
            Src::Const(b) => b,
            Src::Net(n) => self.values[n],
        }
    }

    fn set_port(&mut self, name: &str, bits: &[bool]) {
        let p = self.ports[name].clone();
        for (s, &b) in p.iter().zip(bits) {
            if let Src::Net(n) = s {
                self.values[*n] = b;
            }
        }
    }

    fn port(&self, name: &str) -> u64 {
        self.ports[name]
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &s)| acc | (self.get(s) as u64) << i)
    }

    fn settle(&mut self) {
        for i in 0..self.comb.len() {
            let c = &self.comb[i];
            let a = self.get(c.ins[0]);
            let b = c.ins.get(1).is_some_and(|&s| self.get(s));
            let y = match c.kind.as_str() {
                "$_NOT_" => !a,
                "$_BUF_" => a,
                "$_AND_" => a & b,
                "$_OR_" => a | b,
                "$_XOR_" => a ^ b,
                "$_NAND_" => !(a & b),
                "$_NOR_" => !(a | b),
                "$_XNOR_" => !(a ^ b),
                "$_ANDNOT_" => a & !b,
                "$_ORNOT_" => a | !b,
                "$_MUX_" => {
                    if self.get(c.ins[2]) {
                        b
                    } else {
                        a
                    }
                }
                k => panic!("unsupported cell {k}"),
            };
            self.values[c.out] = y;
        }
    }

    fn clock(&mut self) {
        let next: Vec<bool> = self.flops.iter().map(|&(d, _)| self.get(d)).collect();
        for (&(_, q), v) in self.flops.iter().zip(next) {
            self.values[q] = v;
        }
    }
}

fn random_model(classes: usize, clauses: usize, features: usize, seed: u64) -> TaStateMatrix {
    let mut m = TaStateMatrix::new(classes, clauses, features, 8).unwrap();
    let s = KeyedStream::new(seed, &[3]);
    let mut k = 0;
    for c in 0..classes {
        for j in 0..clauses {
            for l in 0..2 * features {
                let st = if s.below(k, 6) == 0 { 9 } else { 8 };
                m.set_state(c, j, l, st as u32).unwrap();
                k += 1;
            }
        }
    }
    m
}

fn bits_of(v: &BitVector) -> Vec<bool> {
    v.iter().collect()
}

fn run_lockstep(
    bin: &str,
    classes: usize,
    f: usize,
    w: usize,
    datapath: DatapathConfig,
    seed: u64,
) {
    let m = random_model(classes, 6, f, seed);
    let plan = PacketPlan::new(f, w).unwrap();
    let compiled = CompiledModel::new(&m, plan).unwrap();
    let cfg = EmitConfig {
        datapath,
        ..EmitConfig::default()
    };
    let design = emit_rtl(&compiled, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    design.write_to(dir.path()).unwrap();
    let files: Vec<&str> = design.verilog_files().map(|(n, _)| n).collect();
    let script = format!(
        "read_verilog {}; synth -flatten -top tm_top; dffunmap; opt_clean; write_json net.json",
        files.join(" ")
    );
    let out = Command::new(bin)
        .current_dir(dir.path())
        .args(["-q", "-p", &script])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut g = Gates::load(&dir.path().join("net.json"), "tm_top");

    let net = share_subexpressions(&partition(&compiled.clauses, &plan), cfg.sharing);
    let mut acc = Accelerator::new(&compiled, &net, datapath);
    let rng = KeyedStream::new(seed, &[4]);
    let p = plan.packet_count();
    let samples: Vec<BitVector> = (0..40)
        .map(|i| {
            let bits: Vec<bool> = (0..f)
                .map(|b| rng.below(1000 + i * 64 + b as u64, 2) == 1)
                .collect();
            BitVector::from_bools(&bits)
        })
        .collect();
    let words: Vec<Vec<BitVector>> = samples
        .iter()
        .map(|x| packetize(x, &plan).unwrap())
        .collect();
    let mut next_word = 0usize;
    let mut results = Vec::new();

    for cycle in 0..1500u64 {
        let rst = cycle < 2 || cycle == 700;
        if cycle == 700 {
            next_word -= next_word % p;
        }
        let tvalid = rng.below(2 * cycle, 4) != 0;
        let result_ready = rng.below(2 * cycle + 1, 3) != 0;
        let (dp, pk) = (next_word / p % samples.len(), next_word % p);
        let data = &words[dp][pk];
        // Occasionally send a wrong TLAST to exercise resync and the error flag.
        let bad = cycle > 1000 && rng.below(5000 + cycle, 8) == 0;
        let tlast = (pk == p - 1) ^ bad;

        g.set_port("rst", &[rst]);
        g.set_port("s_axis_tvalid", &[tvalid]);
        g.set_port("s_axis_tlast", &[tlast]);
        g.set_port("result_ready", &[result_ready]);
        g.set_port("s_axis_tdata", &bits_of(data));
        g.settle();
        let o = acc.step(CycleInputs {
            rst,
            tvalid,
            tdata: Some(data),
            tlast,
            result_ready,
        });
        let ctx = format!("cycle {cycle} ({classes} classes, F={f}, W={w}, {datapath:?})");
        assert_eq!(g.port("s_axis_tready") == 1, o.tready, "tready at {ctx}");
        assert_eq!(
            g.port("result_valid") == 1,
            o.result_valid,
            "result_valid at {ctx}"
        );
        assert_eq!(g.port("error") == 1, o.error, "error at {ctx}");
        assert_eq!(g.port("state"), o.state.encoding() as u64, "state at {ctx}");
        if o.result_valid {
            assert_eq!(
                g.port("result_class") as usize,
                o.result_class,
                "result_class at {ctx}"
            );
            if result_ready {
                results.push(o.result_class);
            }
        }
        if let Some(k) = o.accepted {
            assert!(!rst);
            next_word += 1;
            if tlast && k + 1 != p {
                next_word += p - 1 - k;
            }
        }
        g.clock();
    }
    assert!(
        results.len() >= samples.len(),
        "only {} results",
        results.len()
    );
}

#[test]
fn gate_netlist_matches_cycle_model() {
    let Some(bin) = yosys() else {
        eprintln!("yosys not found, skipping");
        return;
    };
    let dp = |k_cs, k_am| DatapathConfig {
        class_sum_stages: k_cs,
        argmax_stages: k_am,
    };
    run_lockstep(bin, 3, 20, 8, dp(1, 1), 1);
    run_lockstep(bin, 5, 17, 4, dp(0, 0), 2);
    run_lockstep(bin, 2, 12, 12, dp(2, 3), 3);
    run_lockstep(bin, 10, 33, 16, dp(1, 2), 4);
    run_lockstep(bin, 1, 6, 5, dp(0, 1), 5);
}
